//! Build representations of the lattice: the standard inclusion, symmetric
//! powers, direct sums, and an explicit matrix block round-tripped as TOML.

use cocycle_lab::representation::{direct_sum, rho_of_word, sym_power, Representation, RepresentationBlock};
use cocycle_lab::sl2::Lattice;

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let standard = Representation::standard(&lattice);
    let cubic = sym_power(&standard, 3)?;
    let mixed = direct_sum(&standard, &Representation::trivial(1, lattice.mode()))?;
    for rep in [&standard, &cubic, &mixed] {
        println!("{}: dim {}, special {}", rep.label(), rep.dim(), rep.is_special());
    }

    let w = lattice.parse_word("S^1 T^2 S^-1")?;
    println!("Sym^3(S T^2 S^-1) =\n{:.1}", rho_of_word(&cubic, &w)?);

    // the same representation, serialized as it would appear in a config file
    let block = RepresentationBlock::from(&cubic);
    let text = toml::to_string(&block).expect("blocks serialize");
    println!("{text}");
    let back = Representation::try_from(&toml::from_str::<RepresentationBlock>(&text).expect("valid TOML"))?;
    println!("round trip equal: {}", back == cubic);

    // images violating the lattice relations are rejected
    let mut bad = block.clone();
    bad.images[0][0] = 2.0;
    if let Err(e) = Representation::try_from(&bad) {
        println!("rejected: {e}");
    }
    Ok(())
}
