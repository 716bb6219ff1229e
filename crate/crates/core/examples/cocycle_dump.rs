//! Sample a trajectory of the suspension cocycle and dump its increments,
//! one tab-separated line per step (step, dt, return word, matrix entries).

use cocycle_lab::cocycle::{dump_trajectory, random_base_point, sample_trajectory, SheetPoint, TrajectoryKind};
use cocycle_lab::representation::{sym_power, Representation};
use cocycle_lab::sl2::Lattice;

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let rep = sym_power(&Representation::standard(&lattice), 2)?;
    let x0 = SheetPoint::from(random_base_point(42, &lattice));
    let traj = sample_trajectory(x0, 8, 0.5, TrajectoryKind::GEODESIC, &rep, &lattice, 42)?;
    println!("valid {}, flow time {}", traj.valid, traj.duration());
    print!("{}", dump_trajectory(&traj, &lattice));
    Ok(())
}
