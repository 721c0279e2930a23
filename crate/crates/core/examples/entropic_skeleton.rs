//! One entropic draw at beta = 30: its holes (the power cells) and an SVG of
//! the skeleton it lives on. Writes `skeleton.svg` to the working directory.

use entropic::cli::svg::SvgScene;
use entropic::conjugation::{entropic_draw, hole_report, interior_fraction, ConjugationConfig};

fn main() -> entropic::Result<()> {
    let cfg = ConjugationConfig::new(2).with_grid(256).with_points(5000);
    let s = entropic_draw(30.0, 2, 7, 0, &cfg)?;
    let mut holes = hole_report(&s.diagram);
    holes.sort_by(|a, b| b.mass.total_cmp(&a.mass));
    println!("{} holes; the largest:", holes.len());
    for h in holes.iter().take(5) {
        println!("  mass {:.4}, box {:.3?} .. {:.3?}", h.mass, h.lo, h.hi);
    }
    let inside = interior_fraction(&s.diagram, &s.cloud.points, 2.0 / 256.0);
    println!("fraction of cloud points inside a hole: {inside}");
    let mut scene = SvgScene::from_sample(&s);
    scene.title = Some("entropic sample, beta = 30".into());
    std::fs::write("skeleton.svg", scene.render())?;
    println!("wrote skeleton.svg");
    Ok(())
}
