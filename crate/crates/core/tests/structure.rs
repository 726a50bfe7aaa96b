use ndpart::{
    build_vtree, build_vtree_with, generate_gaussian_mixture, generate_uniform, kd_partition, Dataset, Execution,
    SeedKind, VTreeConfig,
};

type P = (f64, f64);

fn cross(o: P, a: P, b: P) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull by Andrew's monotone chain.
fn hull(mut pts: Vec<P>) -> Vec<P> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<P> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<P> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn strictly_inside(h: &[P], p: P) -> bool {
    h.len() >= 3 && (0..h.len()).all(|i| cross(h[i], h[(i + 1) % h.len()], p) > 1e-12)
}

/// Indices of points lying strictly inside the hull of a partition they do
/// not belong to. Every cell of both schemes is convex, so this is empty.
fn intruders(ds: &Dataset, labels: &[usize], m: usize) -> Vec<(usize, usize)> {
    let pt = |r: usize| (ds.row(r)[0], ds.row(r)[1]);
    let mut out = Vec::new();
    for p in 0..m {
        let h = hull((0..ds.len()).filter(|&r| labels[r] == p).map(pt).collect());
        for r in (0..ds.len()).filter(|&r| labels[r] != p) {
            if strictly_inside(&h, pt(r)) {
                out.push((r, p));
            }
        }
    }
    out
}

#[test]
fn four_partition_regions_are_contiguous() {
    for seed in 0..5 {
        let ds = generate_uniform(2000, 2, 0.0, 1.0, seed).unwrap();
        let kd = kd_partition(&ds, 4, 0.0).unwrap();
        assert_eq!(intruders(&ds, kd.assignment().labels(), 4), vec![], "kd-tree, seed {seed}");
        for seeding in [SeedKind::Random, SeedKind::Gnat, SeedKind::KMeansPP, SeedKind::Median] {
            let tree = build_vtree(&ds, &VTreeConfig::new(4, seeding, seed)).unwrap();
            let labels = tree.leaf_assignment().labels();
            assert_eq!(intruders(&ds, labels, 4), vec![], "vtree({seeding:?}), seed {seed}");
        }
    }
}

#[test]
fn kd_touches_more_points_than_vtree_in_high_dimension() {
    for (n, d) in [(500, 64), (800, 256)] {
        let ds = generate_gaussian_mixture(n, d, 8, 1.0, 3).unwrap();
        for m in [2, 4, 8, 16] {
            let kd = kd_partition(&ds, m, 0.0).unwrap().counters().point_touches();
            let vt = build_vtree(&ds, &VTreeConfig::new(m, SeedKind::KMeansPP, 3))
                .unwrap()
                .counters()
                .point_touches();
            assert!(kd > vt, "{n}x{d} m={m}: kd {kd} vs vtree {vt}");
        }
    }
}

#[test]
fn execution_modes_build_identical_trees() {
    let ds = generate_gaussian_mixture(3000, 16, 6, 2.0, 11).unwrap();
    for seeding in [SeedKind::Random, SeedKind::Gnat, SeedKind::KMeansPP, SeedKind::Median] {
        let cfg = VTreeConfig::new(12, seeding, 5).with_eps(0.3);
        let json: Vec<String> = Execution::available()
            .into_iter()
            .map(|exec| serde_json::to_string(&build_vtree_with(&ds, &cfg, exec).unwrap().to_json()).unwrap())
            .collect();
        assert!(json.windows(2).all(|w| w[0] == w[1]), "{seeding:?}");
    }
}
