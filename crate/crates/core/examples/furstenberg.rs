//! The top exponent two ways: QR on frames, and the time average of the
//! projective expansion rate along generic trajectories.

use cocycle_lab::oseledets::{estimate_spectrum, SpectrumJob};
use cocycle_lab::probes::furstenberg_lambda1;
use cocycle_lab::representation::{sym_power, Representation};
use cocycle_lab::sl2::Lattice;

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let standard = Representation::standard(&lattice);
    for k in 1..=3 {
        let rep = sym_power(&standard, k)?;
        let spectrum = estimate_spectrum(&rep, &lattice, &SpectrumJob::geodesic(8, 2500, 7))?;
        let f = furstenberg_lambda1(&rep, &lattice, &spectrum, 16, 2000, 8)?;
        println!(
            "Sym^{k}: frame λ1 = {:.4} ± {:.4}, Furstenberg λ1 = {:.4} ± {:.4}",
            spectrum.top(),
            spectrum.stderr[0],
            f.estimate,
            f.stderr
        );
    }
    Ok(())
}
