use polarscope_core::dynamics::{
    build_series_table, centroid_series, cluster_toxicity, gaussian_smooth, joint_toxicity, structural_dissimilarity,
    toxicity_series, ScoredRetweet, SeriesTable,
};
use polarscope_core::linalg::Matrix;
use proptest::prelude::*;

/// Double-double number `hi + lo`.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd(p, a.mul_add(b, -p))
}

fn dd_mul(x: Dd, y: Dd) -> Dd {
    let p = two_prod(x.0, y.0);
    let lo = p.1 + (x.0 * y.1 + x.1 * y.0);
    two_sum(p.0, lo)
}

fn dd_from_sub_one(prod: Dd) -> Dd {
    // 1 - prod
    let s = two_sum(1.0, -prod.0);
    two_sum(s.0, s.1 - prod.1)
}

/// `1 - Π (1 - f t)` in double-double arithmetic.
fn oracle(posts: &[(f64, f64)]) -> f64 {
    let mut acc = Dd(1.0, 0.0);
    for &(f, t) in posts {
        let ft = two_prod(f, t);
        let keep = dd_from_sub_one(ft);
        acc = dd_mul(acc, keep);
    }
    let r = dd_from_sub_one(acc);
    r.0 + r.1
}

/// Random users, projections and scored retweets over `windows` daily windows.
#[derive(Clone, Debug)]
struct World {
    labels: Vec<u32>,
    row_users: Vec<u32>,
    row_windows: Vec<u32>,
    projections: Vec<f64>,
    retweets: Vec<(i64, u32, u32)>,
    scores: Vec<Option<f64>>,
}

const CLUSTERS: usize = 4;
const WINDOWS: usize = 12;

fn world() -> impl Strategy<Value = World> {
    let labels = prop::collection::vec(prop_oneof![4 => 0u32..CLUSTERS as u32, 1 => Just(u32::MAX)], 30);
    let rows = prop::collection::vec((0u32..30, 0u32..WINDOWS as u32, prop::collection::vec(-3.0f64..3.0, 3)), 1..120);
    let retweets = prop::collection::vec((0i64..WINDOWS as i64, 0u32..30, 0u32..40), 0..200);
    let scores = prop::collection::vec(prop::option::weighted(0.8, 0.0f64..1.0), 40);
    (labels, rows, retweets, scores).prop_map(|(labels, rows, mut retweets, scores)| {
        retweets.sort_by_key(|r| r.0);
        World {
            labels,
            row_users: rows.iter().map(|r| r.0).collect(),
            row_windows: rows.iter().map(|r| r.1).collect(),
            projections: rows.iter().flat_map(|r| r.2.clone()).collect(),
            retweets,
            scores,
        }
    })
}

fn series(w: &World, labels: &[u32]) -> SeriesTable {
    let projections = Matrix::from_row_major(w.row_users.len(), 3, &w.projections);
    let centroids = centroid_series(&w.row_users, &w.row_windows, &projections, labels, WINDOWS, CLUSTERS);
    let retweets: Vec<ScoredRetweet> = w
        .retweets
        .iter()
        .map(|&(day, user, post)| ScoredRetweet { day, user, post })
        .collect();
    let windows: Vec<(i64, i64)> = (0..WINDOWS as i64).map(|d| (d - 6, d)).collect();
    let toxicity = toxicity_series(&retweets, &w.scores, labels, &windows, CLUSTERS);
    build_series_table((0..WINDOWS as i64).collect(), &centroids, toxicity)
}

fn bits(v: &[Option<f64>]) -> Vec<Option<u64>> {
    v.iter().map(|x| x.map(f64::to_bits)).collect()
}

fn shares() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1u32..50, 0.0f64..=1.0), 1..=20).prop_map(|v| {
        let total: u32 = v.iter().map(|p| p.0).sum();
        v.into_iter().map(|(c, t)| (c as f64 / total as f64, t)).collect()
    })
}

proptest! {
    #[test]
    fn toxicity_matches_extended_precision(posts in shares()) {
        let ours = cluster_toxicity(&posts).unwrap();
        prop_assert!((ours - oracle(&posts)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ours));
    }

    #[test]
    fn toxicity_is_order_invariant(posts in shares(), rot in 0usize..20) {
        let mut shuffled = posts.clone();
        shuffled.reverse();
        let r = rot % shuffled.len();
        shuffled.rotate_left(r);
        let a = cluster_toxicity(&posts).unwrap();
        let b = cluster_toxicity(&shuffled).unwrap();
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn toxicity_monotone_in_share_and_score(posts in shares(), i in 0usize..20, bump in 0.0f64..0.5) {
        let i = i % posts.len();
        let base = cluster_toxicity(&posts).unwrap();
        let mut up = posts.clone();
        up[i].1 = (up[i].1 + bump).min(1.0);
        prop_assert!(cluster_toxicity(&up).unwrap() >= base - 1e-15);
    }

    #[test]
    fn joint_folds_associatively(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        let direct = 1.0 - (1.0 - a) * (1.0 - b) * (1.0 - c);
        let left = joint_toxicity(joint_toxicity(a, b), c);
        let right = joint_toxicity(a, joint_toxicity(b, c));
        let mid = joint_toxicity(joint_toxicity(a, c), b);
        for v in [left, right, mid] {
            prop_assert!((v - direct).abs() <= 1e-15);
        }
        let ab = joint_toxicity(a, b);
        prop_assert!(ab >= a.max(b));
        prop_assert_eq!(ab.to_bits(), joint_toxicity(b, a).to_bits());
        prop_assert!(ab <= 1.0);
    }

    #[test]
    fn dissimilarity_symmetric_and_bounded(
        x in prop::collection::vec(-5.0f64..5.0, 4),
        y in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let d1 = structural_dissimilarity(&x, &y);
        let d2 = structural_dissimilarity(&y, &x);
        prop_assert_eq!(d1.map(f64::to_bits), d2.map(f64::to_bits));
        if let Some(d) = d1 {
            prop_assert!((-1.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn smoothing_keeps_gaps_and_range(v in prop::collection::vec(prop::option::weighted(0.8, 0.0f64..1.0), 1..80)) {
        let s = gaussian_smooth(&v, 3.0);
        let present: Vec<f64> = v.iter().flatten().copied().collect();
        let (lo, hi) = present.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        for (a, b) in v.iter().zip(&s) {
            prop_assert_eq!(a.is_none(), b.is_none());
            if let Some(x) = b {
                prop_assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn relabeling_clusters_only_renames_series(w in world(), perm in Just((0..CLUSTERS as u32).collect::<Vec<u32>>()).prop_shuffle()) {
        let relabeled: Vec<u32> = w.labels.iter().map(|&c| if c == u32::MAX { c } else { perm[c as usize] }).collect();
        let (a, b) = (series(&w, &w.labels), series(&w, &relabeled));
        for (c, &to) in perm.iter().enumerate() {
            prop_assert_eq!(bits(&a.toxicity[c]), bits(&b.toxicity[to as usize]));
        }
        for p in &a.pairs {
            let q = b.pair(perm[p.a] as usize, perm[p.b] as usize).unwrap();
            prop_assert_eq!(bits(&p.dissimilarity), bits(&q.dissimilarity));
            prop_assert_eq!(bits(&p.joint_toxicity), bits(&q.joint_toxicity));
        }
    }
}
