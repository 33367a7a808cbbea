use cdrs_bench::{grid_graph, scene_energy, scene_features};
use cdrs_core::maxflow::solve;

#[test]
fn builders_produce_consistent_inputs() {
    let g = grid_graph(16, 3);
    assert_eq!(g.node_count(), 16 * 16 + 2);
    let cut = solve(&g).unwrap();
    let mask = cut.source_mask();
    assert!((g.cut_capacity(&mask) - cut.flow).abs() < 1e-9);

    let (model, init) = scene_energy(32, 30, 450.0);
    assert_eq!(model.dims(), init.dims());
    assert_eq!(scene_features(32).len(), 5);
}
