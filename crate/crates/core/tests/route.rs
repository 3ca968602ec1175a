mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use sbtrack::graph::Rag;
use sbtrack::route::{
    build_simplified_graph, constrained_dijkstra_exact, dijkstra, expand_tour, fixed_endpoint_path, path_cost,
    shortest_path_baseline, simplified_costs, solve_tsp, two_opt,
};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

fn random_matrix(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), 0.0]).collect();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = sbtrack::polyline::dist(pts[i], pts[j]);
        }
    }
    c
}

proptest! {
    #![proptest_config(cases(40))]

    #[test]
    fn dijkstra_matches_path_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=10);
        let g = random_graph(&mut r, n, 0.4);
        let sp = dijkstra(&g, 0).unwrap();
        for t in 0..n {
            prop_assert_eq!(sp.cost[t], brute_shortest(&g, 0, t));
            if let Some(p) = sp.path_to(t) {
                prop_assert_eq!(g.walk_cost(&p), Some(sp.cost[t]));
            }
        }
    }

    #[test]
    fn dijkstra_costs_satisfy_triangle_property(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 12, 0.3);
        let sp = dijkstra(&g, 0).unwrap();
        for e in g.edges() {
            prop_assert!(sp.cost[e.a] <= sp.cost[e.b] + e.cost);
            prop_assert!(sp.cost[e.b] <= sp.cost[e.a] + e.cost);
        }
    }

    #[test]
    fn scaling_costs_scales_baseline(seed in any::<u64>(), k in 0.1f64..10.0) {
        let mut r = rng(seed);
        let n = 10;
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if r.random_bool(0.4) {
                    // Continuous random costs make equal-cost paths practically impossible.
                    edges.push((a, b, 1.0 + r.random_range(0.0..1.0)));
                }
            }
        }
        let g = Rag::from_edges(n, &edges).unwrap();
        let scaled: Vec<_> = edges.iter().map(|&(a, b, c)| (a, b, c * k)).collect();
        let gk = Rag::from_edges(n, &scaled).unwrap();
        match (shortest_path_baseline(&g, 0, n - 1), shortest_path_baseline(&gk, 0, n - 1)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.nodes, &b.nodes);
                prop_assert!((b.cost - k * a.cost).abs() <= 1e-9 * b.cost.max(1.0));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "reachability changed under scaling"),
        }
    }

    #[test]
    fn exact_solver_matches_order_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=8);
        let g = random_graph(&mut r, n, 0.45);
        let k = r.random_range(0..=3.min(n - 2));
        let must: Vec<usize> = (2..n).take(k).collect();
        let want = brute_constrained(&g, 0, 1, &must);
        match constrained_dijkstra_exact(&g, 0, 1, &must) {
            Ok(route) => {
                prop_assert_eq!(route.cost, want);
                prop_assert_eq!(g.walk_cost(&route.nodes), Some(want));
                for m in &must {
                    prop_assert!(route.nodes.contains(m));
                }
                prop_assert_eq!(route.nodes[0], 0);
                prop_assert_eq!(*route.nodes.last().unwrap(), 1);
            }
            Err(_) => prop_assert!(want.is_infinite()),
        }
    }

    #[test]
    fn tour_is_a_fixed_endpoint_permutation(seed in any::<u64>(), refine in any::<bool>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=12);
        let c = random_matrix(&mut r, n);
        let start = r.random_range(0..n);
        let end = (start + r.random_range(1..n)) % n;
        let order = fixed_endpoint_path(&c, n, start, end, refine);
        prop_assert_eq!(order.len(), n);
        prop_assert_eq!(order[0], start);
        prop_assert_eq!(*order.last().unwrap(), end);
        let mut s = order.clone();
        s.sort_unstable();
        prop_assert_eq!(s, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn two_opt_never_worsens(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=12);
        let c = random_matrix(&mut r, n);
        let base = fixed_endpoint_path(&c, n, 0, 1, false);
        let refined = two_opt(&c, n, base.clone());
        prop_assert!(path_cost(&c, n, &refined) <= path_cost(&c, n, &base) + 1e-9);
        prop_assert_eq!(refined[0], 0);
        prop_assert_eq!(*refined.last().unwrap(), 1);
    }

    #[test]
    fn tour_cost_is_within_band_of_optimum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=8);
        let g = random_graph(&mut r, n, 0.5);
        let delta = r.random_range(20.0..120.0);
        let sg = build_simplified_graph(&g, 0, 1, &(2..n).collect::<Vec<_>>(), delta).unwrap();
        let order = solve_tsp(&sg, true);
        let got = path_cost(&sg.cost, n, &order);
        let opt = brute_tsp(&sg.cost, n, 0, 1);
        prop_assert!(got >= opt - 1e-9);
        prop_assert!(got <= 1.3 * opt + 1e-9, "tour {} vs optimum {}", got, opt);
    }

    #[test]
    fn near_pairs_never_cost_more_than_far_pairs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(3..=10);
        let g = random_graph(&mut r, n, 0.4);
        let delta = r.random_range(20.0..100.0);
        let sg = build_simplified_graph(&g, 0, 1, &(2..n).collect::<Vec<_>>(), delta).unwrap();
        let sp: Vec<_> = (0..n).map(|v| dijkstra(&g, v).unwrap()).collect();
        let mut near_max = 0.0f64;
        let mut far_min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                prop_assert_eq!(sg.cost(i, j), sg.cost(j, i));
                let d = sbtrack::polyline::dist(sg.positions[i], sg.positions[j]);
                if d <= delta && sp[i].reachable(j) {
                    near_max = near_max.max(sg.cost(i, j));
                } else if d > delta {
                    far_min = far_min.min(sg.cost(i, j));
                }
            }
        }
        prop_assert!(near_max <= 1.0);
        prop_assert!(near_max < far_min);
    }
}

#[test]
fn collinear_must_pass_nodes_are_visited_in_order() {
    let xs = [0.0, 100.0, 20.0, 40.0, 60.0, 80.0];
    let pos: Vec<[f64; 3]> = xs.iter().map(|&x| [x, 0.0, 0.0]).collect();
    let n = pos.len();
    let euclid: Vec<f64> = (0..n * n).map(|k| sbtrack::polyline::dist(pos[k / n], pos[k % n])).collect();
    let (cost, _) = simplified_costs(&euclid, &vec![None; n * n], n, 10.0);
    for refine in [false, true] {
        assert_eq!(fixed_endpoint_path(&cost, n, 0, 1, refine), vec![0, 2, 3, 4, 5, 1]);
    }
}

#[test]
fn paths_costing_the_normalizer_are_exactly_one() {
    let pos = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [10.0, 10.0, 0.0], [70.0, 0.0, 0.0]];
    let n = pos.len();
    let euclid: Vec<f64> = (0..n * n).map(|k| sbtrack::polyline::dist(pos[k / n], pos[k % n])).collect();
    let graph = vec![Some(4.0); n * n];
    let (cost, m) = simplified_costs(&euclid, &graph, n, 50.0);
    assert_eq!(m, 4.0);
    for i in 0..n {
        for j in 0..n {
            let c = cost[i * n + j];
            if i == j {
                assert_eq!(c, 0.0);
            } else if i == 4 || j == 4 {
                assert!(c > 1.0);
            } else {
                assert_eq!(c, 1.0);
            }
        }
    }
}

#[test]
fn adjacent_endpoints_expand_to_two_centroids() {
    let g = Rag::from_edges(2, &[(0, 1, 0.3)]).unwrap().with_centroids(&[[0.0; 3], [4.0, 0.0, 0.0]]);
    let sg = build_simplified_graph(&g, 0, 1, &[], 50.0).unwrap();
    let order = solve_tsp(&sg, true);
    assert_eq!(order, vec![0, 1]);
    let route = expand_tour(&g, &sg, &order).unwrap();
    assert_eq!(route.polyline.points(), &[[0.0; 3], [4.0, 0.0, 0.0]]);
    assert!(route.is_connected());
}

#[test]
fn cached_leg_passes_through_unchanged() {
    let pos = [[0.0, 0.0, 0.0], [30.0, 0.0, 0.0], [10.0, 5.0, 0.0], [20.0, 5.0, 0.0]];
    let g = Rag::from_edges(4, &[(0, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0), (0, 1, 9.0)])
        .unwrap()
        .with_centroids(&pos);
    let sg = build_simplified_graph(&g, 0, 1, &[], 50.0).unwrap();
    let (c, walk) = sg.cached_path(0, 1).unwrap();
    assert_eq!((c, walk.clone()), (3.0, vec![0, 2, 3, 1]));
    let route = expand_tour(&g, &sg, &[0, 1]).unwrap();
    assert_eq!(route.nodes, walk);
    let want: Vec<[f64; 3]> = walk.iter().map(|&v| pos[v]).collect();
    assert_eq!(route.polyline.points(), &want[..]);
}
