use proptest::prelude::*;

use specpart::classify::{classify_cells, count_cell_neighbors, extract_isosurface, SpectralSignature};
use specpart::eigensolve::{penalized_eigenvalue, smallest_eigpair, EigOptions};
use specpart::grid::{adjacency, assemble_laplacian, build_grid, BoundaryMode, DomainSpec, Grid};
use specpart::neighborhood::{computational_neighborhood, neighbors_up_to_order, Neighborhood};
use specpart::partition_opt::{
    initial_state, project_to_partition, random_init, refine, run, Control, DensitySet, OptSettings, Problem,
};
use specpart::surface_fem::{generate_sphere, weighted_mass};
use specpart::SparseOperator;

fn grid2(res: usize, mode: BoundaryMode) -> Grid {
    build_grid(&DomainSpec::unit_square(), res, mode).unwrap()
}

fn mode() -> impl Strategy<Value = BoundaryMode> {
    prop_oneof![Just(BoundaryMode::Dirichlet), Just(BoundaryMode::Periodic)]
}

fn disk(g: &Grid, c: [f64; 2], r: f64) -> Vec<f64> {
    (0..g.node_count())
        .map(|x| {
            let p = g.position(x);
            f64::from(((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) <= r * r)
        })
        .collect()
}

fn eig(problem: &Problem, phi: &[f64], c: f64, nb: &Neighborhood) -> (f64, Vec<f64>) {
    let r = penalized_eigenvalue(&problem.penalty_operator(), phi, c, nb, None, &EigOptions::default()).unwrap();
    (r.eigenvalue, r.eigenvector)
}

/// Hop distances from `s` by breadth-first search.
fn hops(g: &Grid, s: usize) -> Vec<usize> {
    let adj = adjacency(g);
    let mut d = vec![usize::MAX; g.node_count()];
    d[s] = 0;
    let mut q = std::collections::VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &w in adj.neighbors(v) {
            if d[w] == usize::MAX {
                d[w] = d[v] + 1;
                q.push_back(w);
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_is_positive_semidefinite(
        res in 3usize..14,
        three in any::<bool>(),
        m in mode(),
        seed in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let spec = if three { DomainSpec::unit_cube() } else { DomainSpec::unit_square() };
        let g = build_grid(&spec, res, m).unwrap();
        let l = assemble_laplacian(&g);
        prop_assert!(l.is_symmetric(0.0));
        let v: Vec<f64> = (0..g.node_count()).map(|i| seed[i % 64] * ((i / 64) as f64 + 1.0).sin()).collect();
        let n2: f64 = v.iter().map(|x| x * x).sum();
        prop_assert!(l.quadratic_form(&v) >= -1e-10 * n2);
    }

    #[test]
    fn dirichlet_box_adjacency_is_connected(res in 3usize..30, three in any::<bool>()) {
        let spec = if three { DomainSpec::unit_cube() } else { DomainSpec::unit_square() };
        let g = build_grid(&spec, res.min(if three { 12 } else { 30 }), BoundaryMode::Dirichlet).unwrap();
        prop_assert_eq!(adjacency(&g).component_count(), 1);
    }

    #[test]
    fn reachability_equals_breadth_first_distance(res in 3usize..=20, p in 1usize..9, m in mode(), pick in 0usize..400) {
        let g = grid2(res, m);
        let reach = neighbors_up_to_order(&adjacency(&g), p).unwrap();
        let s = pick % g.node_count();
        let d = hops(&g, s);
        let expected: Vec<usize> = (0..g.node_count()).filter(|&x| x != s && d[x] <= p).collect();
        prop_assert_eq!(reach.reachable(s), expected.as_slice());
    }

    #[test]
    fn neighborhood_is_union_of_reachable_sets(res in 4usize..16, p in 1usize..6, seed in any::<u64>()) {
        let g = grid2(res, BoundaryMode::Dirichlet);
        let adj = adjacency(&g);
        let phi: Vec<f64> = (0..g.node_count())
            .map(|x| if (x as u64).wrapping_mul(seed | 1).rotate_left(17) % 11 == 0 { 1.0 } else { 0.0 })
            .collect();
        prop_assume!(phi.iter().any(|&v| v > 0.0));
        let nb = computational_neighborhood(&phi, &adj, p, 0.01).unwrap();
        let reach = neighbors_up_to_order(&adj, p).unwrap();
        let mut expected = std::collections::BTreeSet::new();
        for x in (0..phi.len()).filter(|&x| phi[x] > 0.01) {
            expected.insert(x);
            expected.extend(reach.reachable(x).iter().copied());
        }
        let expected: Vec<usize> = expected.into_iter().collect();
        prop_assert_eq!(nb.nodes(), expected.as_slice());
    }

    #[test]
    fn projection_restores_the_partition_constraint(
        n in 1usize..6,
        values in prop::collection::vec(-2.0f64..2.0, 6 * 40),
        with_void in any::<bool>(),
    ) {
        let nodes = 40;
        let void = with_void.then(|| values[..nodes].iter().map(|v| v * 0.5).collect::<Vec<_>>());
        let d = DensitySet::new(n, nodes, values[..n * nodes].to_vec(), void).unwrap();
        let mask: Vec<bool> = (0..nodes).map(|i| i % 7 != 3).collect();
        let (p, _) = project_to_partition(&d, &mask);
        prop_assert!(p.constraint_defect(&mask) <= 1e-12);
        prop_assert!(p.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let (q, deg) = project_to_partition(&p, &mask);
        prop_assert_eq!(deg, 0);
        for (a, b) in p.values().iter().zip(q.values()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn refinement_keeps_a_partition(seed in any::<u64>(), n in 1usize..4, m in mode()) {
        let coarse = grid2(8, m);
        let fine = grid2(17, m);
        let pc = Problem::grid(coarse.clone());
        let d = random_init(n, &pc, false, seed).unwrap();
        let r = refine(&d, &coarse, &fine).unwrap();
        prop_assert!(r.constraint_defect(fine.mask()) <= 1e-12);
    }

    #[test]
    fn cell_adjacency_is_symmetric(seed in any::<u64>(), n in 2usize..7, level in 0.2f64..0.6) {
        let g = grid2(12, BoundaryMode::Periodic);
        let pr = Problem::grid(g.clone());
        let d = random_init(n, &pr, false, seed).unwrap();
        let graph = count_cell_neighbors(&d, &adjacency(&g), level).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(graph.adjacent(i, j), graph.adjacent(j, i));
            }
            prop_assert!(!graph.adjacent(i, i));
        }
    }

    #[test]
    fn classification_ignores_cell_order(
        raw in prop::collection::vec(prop::collection::vec(0.5f64..2.0, 4), 2..9),
        rot in 0usize..9,
        eps in 0.01f64..0.3,
    ) {
        let sigs: Vec<SpectralSignature> = raw.iter().map(|v| SpectralSignature::from_eigenvalues(v.clone()).unwrap()).collect();
        let n = sigs.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let shuffled: Vec<SpectralSignature> = perm.iter().map(|&i| sigs[i].clone()).collect();
        let a = classify_cells(&sigs, eps).unwrap();
        let b = classify_cells(&shuffled, eps).unwrap();
        for i in 0..n {
            for j in 0..n {
                let same_a = a.classes[perm[i]] == a.classes[perm[j]];
                let same_b = b.classes[i] == b.classes[j];
                prop_assert_eq!(same_a, same_b);
            }
        }
    }

    #[test]
    fn smaller_epsilon_refines_classes(
        raw in prop::collection::vec(prop::collection::vec(0.5f64..2.0, 4), 2..10),
        e1 in 0.0f64..0.3,
        extra in 0.0f64..0.3,
    ) {
        let sigs: Vec<SpectralSignature> = raw.iter().map(|v| SpectralSignature::from_eigenvalues(v.clone()).unwrap()).collect();
        let fine = classify_cells(&sigs, e1).unwrap();
        let coarse = classify_cells(&sigs, e1 + extra).unwrap();
        for i in 0..sigs.len() {
            for j in 0..sigs.len() {
                if fine.classes[i] == fine.classes[j] {
                    prop_assert_eq!(coarse.classes[i], coarse.classes[j]);
                }
            }
        }
    }

    #[test]
    fn weighted_surface_mass_is_positive_semidefinite(
        w in prop::collection::vec(0.0f64..1.0, 42),
        u in prop::collection::vec(-1.0f64..1.0, 42),
    ) {
        let s = generate_sphere(1);
        let all: Vec<usize> = (0..42).collect();
        let m = weighted_mass(&s, &w, &all).unwrap();
        prop_assert!(m.quadratic_form(&u) >= -1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn isosurfaces_are_watertight(
        centers in prop::collection::vec((0.15f64..0.85, 0.15f64..0.85, 0.15f64..0.85, 0.08f64..0.25), 1..4),
        m in mode(),
    ) {
        let g = build_grid(&DomainSpec::unit_cube(), 14, m).unwrap();
        let phi: Vec<f64> = (0..g.node_count())
            .map(|x| {
                let p = g.position(x);
                let inside = centers.iter().any(|&(a, b, c, r)| {
                    (p[0] - a).powi(2) + (p[1] - b).powi(2) + (p[2] - c).powi(2) < r * r
                });
                f64::from(inside)
            })
            .collect();
        prop_assume!(phi.iter().any(|&v| v > 0.5));
        if let Ok(mesh) = extract_isosurface(&g, &phi, 0.5) {
            prop_assert!(mesh.is_oriented_closed());
            prop_assert!(mesh.enclosed_volume() > 0.0);
        } else {
            // Only a level set wrapping the periodic box may be rejected.
            prop_assert_eq!(m, BoundaryMode::Periodic);
        }
    }

    #[test]
    fn noisy_cells_touching_the_box_are_watertight(bits in prop::collection::vec(any::<bool>(), 8 * 8 * 8)) {
        let g = build_grid(&DomainSpec::unit_cube(), 8, BoundaryMode::Dirichlet).unwrap();
        let phi: Vec<f64> = bits.iter().map(|&b| f64::from(b)).collect();
        prop_assume!(bits.iter().any(|&b| b));
        let mesh = extract_isosurface(&g, &phi, 0.5).unwrap();
        prop_assert!(mesh.is_oriented_closed());
        let inside = bits.iter().filter(|&&b| b).count() as f64 * g.spacing().powi(3);
        prop_assert!(mesh.enclosed_volume() > 0.0 && mesh.enclosed_volume() < 1.0 + 1e-12, "{} vs {inside}", mesh.enclosed_volume());
    }

    #[test]
    fn shift_identity(c in prop::sample::select(vec![1.0, 10.0, 1000.0]), res in 5usize..20) {
        let l = assemble_laplacian(&grid2(res, BoundaryMode::Dirichlet));
        let opts = EigOptions::default();
        let base = smallest_eigpair(&l, &opts).unwrap().eigenvalue;
        let shifted = l.add_scaled(c, &SparseOperator::identity(l.order()));
        let s = smallest_eigpair(&shifted, &opts).unwrap().eigenvalue;
        prop_assert!((s - base - c).abs() <= 1e-7 * (base + c));
    }

    #[test]
    fn penalized_eigenvalue_grows_with_penalty(cx in 0.3f64..0.7, cy in 0.3f64..0.7, r in 0.1f64..0.25) {
        let g = grid2(32, BoundaryMode::Dirichlet);
        let phi = disk(&g, [cx, cy], r);
        prop_assume!(phi.iter().any(|&v| v > 0.0));
        let pr = Problem::grid(g);
        let nb = Neighborhood::full(phi.len());
        let ls: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|&c| eig(&pr, &phi, c, &nb).0).collect();
        prop_assert!(ls[0] <= ls[1] * (1.0 + 1e-9) && ls[1] <= ls[2] * (1.0 + 1e-9));
    }

    #[test]
    fn first_eigenvector_has_one_sign(cx in 0.3f64..0.7, cy in 0.3f64..0.7, r in 0.1f64..0.25, p in 2usize..8) {
        let g = grid2(32, BoundaryMode::Dirichlet);
        let phi = disk(&g, [cx, cy], r);
        prop_assume!(phi.iter().any(|&v| v > 0.0));
        let pr = Problem::grid(g);
        let nb = computational_neighborhood(&phi, pr.adjacency(), p, 0.01).unwrap();
        let (_, u) = eig(&pr, &phi, 1e4, &nb);
        let scale = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        prop_assert!(u.iter().all(|&x| x >= -1e-8 * scale));
    }

    #[test]
    fn enlarging_the_neighborhood_never_raises_the_eigenvalue(cx in 0.35f64..0.65, cy in 0.35f64..0.65, r in 0.08f64..0.2) {
        let g = grid2(48, BoundaryMode::Dirichlet);
        let phi = disk(&g, [cx, cy], r);
        prop_assume!(phi.iter().any(|&v| v > 0.0));
        let pr = Problem::grid(g);
        let mut last = f64::INFINITY;
        for p in 1..=8 {
            let nb = computational_neighborhood(&phi, pr.adjacency(), p, 0.01).unwrap();
            let l = eig(&pr, &phi, 1e4, &nb).0;
            prop_assert!(l <= last * (1.0 + 1e-9));
            last = l;
        }
    }

    #[test]
    fn restriction_matches_full_grid_for_interior_cells(cx in 0.35f64..0.65, cy in 0.35f64..0.65, r in 0.08f64..0.2, p in 5usize..9) {
        let g = grid2(64, BoundaryMode::Dirichlet);
        let phi = disk(&g, [cx, cy], r);
        prop_assume!(phi.iter().any(|&v| v > 0.0));
        let pr = Problem::grid(g);
        let full = eig(&pr, &phi, 1e4, &Neighborhood::full(phi.len())).0;
        let nb = computational_neighborhood(&phi, pr.adjacency(), p, 0.01).unwrap();
        let restricted = eig(&pr, &phi, 1e4, &nb).0;
        prop_assert!((restricted - full).abs() / full <= 1e-3);
    }

    #[test]
    fn descent_keeps_constraint_and_lowers_energy(seed in any::<u64>(), n in 2usize..5, m in mode()) {
        let pr = Problem::grid(grid2(12, m));
        let settings = OptSettings { max_iter: 8, ..OptSettings::default() };
        let d = random_init(n, &pr, false, seed).unwrap();
        let mut state = initial_state(&pr, d, &settings, 0).unwrap();
        let mut energies = vec![state.energy()];
        let mut defects = Vec::new();
        run(&pr, &settings, &mut state, &mut |s| {
            energies.push(s.energy());
            defects.push(s.densities.constraint_defect(pr.mask()));
            Control::Continue
        })
        .unwrap();
        prop_assert!(energies.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(defects.iter().all(|&d| d <= 1e-12));
        for (rec, w) in state.history.iter().zip(energies.windows(2)) {
            if rec.accepted {
                prop_assert!(w[1] < w[0]);
            } else {
                prop_assert_eq!(w[1], w[0]);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_runs(seed in any::<u64>()) {
        let pr = Problem::grid(grid2(10, BoundaryMode::Dirichlet));
        let settings = OptSettings { max_iter: 5, ..OptSettings::default() };
        let go = || {
            let mut s = initial_state(&pr, random_init(3, &pr, false, seed).unwrap(), &settings, 0).unwrap();
            run(&pr, &settings, &mut s, &mut |_| Control::Continue).unwrap();
            s
        };
        let (a, b) = (go(), go());
        prop_assert_eq!(a.history, b.history);
        prop_assert_eq!(a.densities, b.densities);
    }
}

#[test]
fn reported_restricted_sizes_match_recomputed_neighborhoods() {
    let pr = Problem::grid(grid2(24, BoundaryMode::Dirichlet));
    let settings = OptSettings {
        max_iter: 6,
        ..OptSettings::default()
    };
    let mut state = initial_state(&pr, random_init(4, &pr, false, 9).unwrap(), &settings, 0).unwrap();
    run(&pr, &settings, &mut state, &mut |s| {
        for (i, cell) in s.eval.cells.iter().enumerate() {
            let nb = computational_neighborhood(s.densities.cell(i), pr.adjacency(), settings.order, settings.threshold)
                .unwrap();
            assert_eq!(cell.restricted_size, nb.len());
        }
        let (min, mean, max) = s.eval.restricted_stats();
        let sizes: Vec<usize> = s.eval.cells.iter().map(|c| c.restricted_size).collect();
        assert_eq!(min, *sizes.iter().min().unwrap());
        assert_eq!(max, *sizes.iter().max().unwrap());
        assert!((mean - sizes.iter().sum::<usize>() as f64 / sizes.len() as f64).abs() < 1e-12);
        Control::Continue
    })
    .unwrap();
}

#[test]
fn grid_eigenvalues_converge_at_second_order() {
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    let errs: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&r| {
            let l = assemble_laplacian(&grid2(r, BoundaryMode::Dirichlet));
            (smallest_eigpair(&l, &EigOptions::default()).unwrap().eigenvalue - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.15, "observed order {order}");
    }
}
