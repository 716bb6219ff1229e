//! Lyapunov spectra of the suspension cocycle over the geodesic flow.
//! For Sym^k of the standard inclusion they are k, k − 2, …, −k.

use cocycle_lab::oseledets::{estimate_spectrum, SpectrumJob};
use cocycle_lab::representation::{direct_sum, sym_power, Representation};
use cocycle_lab::sl2::Lattice;

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let standard = Representation::standard(&lattice);
    let reps = vec![
        Representation::trivial(2, lattice.mode()),
        standard.clone(),
        sym_power(&standard, 2)?,
        sym_power(&standard, 3)?,
        direct_sum(&standard, &Representation::trivial(1, lattice.mode()))?,
    ];
    // 8 trajectories of flow time 12500 each
    let job = SpectrumJob::geodesic(8, 12_500, 1);
    for rep in &reps {
        let s = estimate_spectrum(rep, &lattice, &job)?;
        let blocks: Vec<String> = s
            .exponents
            .iter()
            .zip(&s.multiplicities)
            .zip(&s.stderr)
            .map(|((x, m), e)| format!("{x:+.4}±{e:.4} (×{m})"))
            .collect();
        println!("{:<22} {}   Σ = {:.1e}", rep.label(), blocks.join("  "), s.weighted_sum());
    }
    let s = estimate_spectrum(&reps[3], &lattice, &job)?;
    print!("\n{}", s.to_csv());
    Ok(())
}
