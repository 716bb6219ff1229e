//! Kontsevich–Zorich exponents of the three-square L-shaped origami.

use cocycle_lab::origami::{kz_spectrum, veech_orbit, Origami};
use cocycle_lab::oseledets::SpectrumJob;

fn main() -> cocycle_lab::Result<()> {
    let l: Origami = "3; (1,2); (1,3)".parse()?;
    println!("origami {l}  stratum {}  genus {}", l.stratum(), l.genus());

    let orbit = veech_orbit(&l, 1000)?;
    println!("SL(2,Z)-orbit has {} members:", orbit.len());
    for m in &orbit.members {
        println!("  {m}");
    }

    let spectrum = kz_spectrum(&l, &SpectrumJob::geodesic(8, 12_500, 2024), 1000)?;
    println!("exponents (T = {}):", spectrum.horizon);
    for (x, s) in spectrum.raw_exponents.iter().zip(&spectrum.raw_stderr) {
        println!("  {x:+.4} ± {s:.4}");
    }
    println!("symmetry defect {:.2e}", spectrum.symmetry_defect());
    Ok(())
}
