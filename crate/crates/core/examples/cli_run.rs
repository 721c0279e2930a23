//! Drives the command-line front end in-process: a Dirichlet-Ferguson batch,
//! then its conjugates with figures. Output goes to a temporary directory.

fn main() {
    let dir = std::env::temp_dir().join("entropic-cli-example");
    let out = |name: &str| dir.join(name).display().to_string();
    let df = out("df");
    let code = entropic::cli::run(["entropic", "sample-df", "--beta", "8", "--n", "2", "--seed", "1", "--out", &df]);
    assert_eq!(code, 0);
    let input = format!("{df}/measures.jsonl");
    let conj = out("conj");
    let code = entropic::cli::run([
        "entropic", "conjugate", "--input", &input, "--grid", "128", "--points", "2000", "--svg", "--seed", "2", "--out", &conj,
    ]);
    assert_eq!(code, 0);
    println!("{}", std::fs::read_to_string(format!("{conj}/report.csv")).expect("report written"));
    println!("figures in {conj}/svg");
}
