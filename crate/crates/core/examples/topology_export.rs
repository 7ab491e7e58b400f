//! The reference topology with eavesdroppers attached, as an edge list.

use trickleswap::simnet::Topology;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let topo = Topology::reference().attach_eavesdroppers(2);
    topo.validate()?;

    let seed = topo.seed().expect("reference topology has a seed");
    for name in ["n5", "n0"] {
        let id = topo.id_of(name).expect("known node");
        println!(
            "# {name} is {:?} hops from the seed",
            topo.hop_distance(id, seed)
        );
    }
    println!("# {} nodes, {} edges", topo.node_count(), topo.edge_count());
    print!("{}", topo.to_edge_list());
    Ok(())
}
