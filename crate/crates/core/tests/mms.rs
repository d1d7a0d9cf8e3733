use mhdl::solver::mms::{manufactured_forcing_residual, DecayingModes, MmsConfig};

#[test]
fn manufactured_solution_ladder() {
    let cfg = MmsConfig::default();
    let t0 = std::time::Instant::now();
    let table = manufactured_forcing_residual(&DecayingModes, &cfg).unwrap();
    println!("{table:#?}\nelapsed {:?}", t0.elapsed());
    assert!(table.min_spatial_order() >= 1.9, "{:?}", table.spatial_orders);
    assert!(table.min_temporal_order() >= 0.9, "{:?}", table.temporal_orders);
    let floor = table.spatial.last().unwrap().error;
    assert!(table.x_refinement_gap < floor, "{} vs {floor}", table.x_refinement_gap);
}
