//! Triangulates the default surrogate machine and writes the mesh text file.
//!
//! cargo run --release --example mesh_export -- [out.txt]

use pmsm_rom::machine::MachineSpec;
use pmsm_rom::mesh::{build_mesh, partition_dofs, Region};

fn main() -> pmsm_rom::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "mesh.txt".into());
    let spec = MachineSpec::default();
    let mesh = build_mesh(&spec)?;
    let part = partition_dofs(&mesh)?;
    println!("{} nodes, {} triangles, {} rings", mesh.n_nodes(), mesh.triangles.len(), mesh.n_rings());
    println!(
        "dofs: {} static, {} rotating, {} on the interface circle",
        part.n_static(),
        part.n_rotating(),
        part.n_interface()
    );
    for region in [Region::RotorIron, Region::Magnet(0), Region::Air, Region::Tooth(0), Region::StatorYoke] {
        println!("{:<12} area {:.4e} m^2", region.name(), mesh.region_area(region));
    }
    mesh.write_text(&out)?;
    println!("wrote {out}");
    Ok(())
}
