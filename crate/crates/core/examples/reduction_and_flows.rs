//! Reduce points of SL(2,R) to the fundamental domain and follow the geodesic
//! and horocycle flows, printing the return words picked up on the way.

use cocycle_lab::sl2::{flow, BasePoint, FlowKind, Lattice, Mat2};

fn main() -> cocycle_lab::Result<()> {
    for lattice in [Lattice::sl2z(), Lattice::free()] {
        println!("== {:?} lattice ==", lattice.mode());
        // a point far out in the upper half plane
        let g = Mat2::from_iwasawa(7.3, 0.02, 0.4);
        let x = BasePoint::from_rep(g, &lattice)?;
        println!("start z = {:.4}, cusp height {:.3}", x.z(), x.cusp_height(&lattice));

        for (kind, t) in [(FlowKind::Geodesic, 2.5), (FlowKind::HorocyclePlus, 5.0), (FlowKind::HorocycleMinus, -1.5)] {
            let (y, w) = flow(&x, kind, t, &lattice)?;
            println!(
                "{kind:?} t = {t:+}: z = {:.4}, return word {}",
                y.z(),
                w.display_with(lattice.names())
            );
        }

        // flow words compose: the word for s + t is the word for t after the one for s
        let (y, w1) = flow(&x, FlowKind::Geodesic, 1.0, &lattice)?;
        let (_, w2) = flow(&y, FlowKind::Geodesic, 2.0, &lattice)?;
        let (_, w) = flow(&x, FlowKind::Geodesic, 3.0, &lattice)?;
        println!("cocycle law holds: {}", lattice.same_element(&w, &w2.concat(&w1))?);
    }
    Ok(())
}
