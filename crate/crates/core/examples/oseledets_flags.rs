//! Forward and backward Oseledets flags of Sym^2, and how they move under the
//! geodesic flow and the unstable horocycle flow.

use cocycle_lab::cocycle::{derive_seed, random_base_point, SheetPoint};
use cocycle_lab::oseledets::{
    backward_flag, estimate_spectrum, flag_equivariance_defect, forward_flag, subspace_distance, FlagKind, SpectrumJob,
};
use cocycle_lab::probes::quantile;
use cocycle_lab::representation::{sym_power, Representation};
use cocycle_lab::sl2::{FlowKind, Lattice};

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let rep = sym_power(&Representation::standard(&lattice), 2)?;
    let spectrum = estimate_spectrum(&rep, &lattice, &SpectrumJob::geodesic(8, 2500, 3))?;
    println!("exponents {:?}", spectrum.exponents);

    let x = SheetPoint::from(random_base_point(5, &lattice));
    let fwd = forward_flag(&x, &rep, &lattice, 100.0, &spectrum)?;
    let bwd = backward_flag(&x, &rep, &lattice, 100.0, &spectrum)?;
    println!("forward flag dims {:?}, backward flag dims {:?}", fwd.dims(), bwd.dims());
    // E≥2 and E≤1 are complementary
    println!("dist(E≥2, E≤1) = {:.3}", subspace_distance(fwd.member(2)?, bwd.member(1)?));

    let cases = [
        (FlagKind::Backward, 1, FlowKind::HorocyclePlus),
        (FlagKind::Backward, 2, FlowKind::Geodesic),
        (FlagKind::Forward, 2, FlowKind::Geodesic),
        (FlagKind::Forward, 2, FlowKind::HorocyclePlus),
    ];
    for (kind, j, motion) in cases {
        let mut d: Vec<f64> = (0..50)
            .map(|i| {
                let x = SheetPoint::from(random_base_point(derive_seed(9, i), &lattice));
                flag_equivariance_defect(&x, kind, j, motion, 1.0, &rep, &lattice, 100.0, &spectrum)
            })
            .collect::<cocycle_lab::Result<_>>()?;
        d.sort_by(f64::total_cmp);
        println!("{kind:?} member {j} under {motion:?}: median defect {:.2e}", quantile(&d, 0.5));
    }
    Ok(())
}
