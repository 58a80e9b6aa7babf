use proptest::prelude::*;

use terrain_hto::sequence::{
    ascending_node_constraints, descending_node_constraints, dual_point, node_for_progress, Direction, KeyNode,
    NodeContext,
};
use terrain_hto::terrain::{simplify, ProfilePoint, SimplifyConfig};

fn ctx() -> impl Strategy<Value = NodeContext> {
    (0.08..0.25f64, 0.4..0.8f64, 0.08..0.25f64, 0.2..0.8f64, -0.5..0.5f64, 0.02..0.3f64).prop_map(
        |(lf, lt, lr, com, alpha, h)| NodeContext {
            lf,
            lt,
            lr,
            s_com: lf + com * lt,
            alpha,
            h,
            theta_l: -1.2,
            theta_u: 1.5,
        },
    )
}

fn key() -> impl Strategy<Value = KeyNode> {
    prop_oneof![Just(KeyNode::Insertion), (1u8..=4).prop_map(KeyNode::Q)]
}

fn q() -> impl Strategy<Value = [f64; 4]> {
    (0.0..1.2f64, -1.0..1.5f64, -1.0..1.5f64, -0.7..0.7f64).prop_map(|(a, b, c, d)| [a, b, c, d])
}

/// Piecewise-linear profile with steps and slopes, sampled at `d_r`.
fn profile() -> impl Strategy<Value = Vec<ProfilePoint>> {
    prop::collection::vec((0.3..2.0f64, -0.4..0.4f64, -0.6..0.6f64), 1..5).prop_map(|parts| {
        let d_r = SimplifyConfig::default().d_r;
        let mut out = Vec::new();
        let (mut d, mut h) = (0.0, 0.0);
        for (len, step, slope) in parts {
            h += step;
            let n = (len / d_r).round() as usize;
            for _ in 0..n {
                out.push(ProfilePoint::new(d, h));
                d += d_r;
                h += slope * d_r;
            }
        }
        out.push(ProfilePoint::new(d, h));
        out
    })
}

proptest! {
    #[test]
    fn dual_point_is_an_involution(q in q(), ls in 0.5..1.5f64) {
        let back = dual_point(&dual_point(&q, ls), ls);
        for i in 0..4 {
            prop_assert!((back[i] - q[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn descents_are_mirrored_ascents(k in key(), q in q(), c in ctx()) {
        let mirror = match k { KeyNode::Q(i) => KeyNode::Q(5 - i), other => other };
        let d = descending_node_constraints(k, &q, &c).unwrap();
        let a = ascending_node_constraints(mirror, &dual_point(&q, c.l_sigma()), &c.mirrored()).unwrap();
        prop_assert_eq!(d.equalities.len(), a.equalities.len());
        for (x, y) in d.equalities.iter().zip(&a.equalities) {
            prop_assert!((x.value - y.value).abs() < 1e-12);
        }
        // and the residual gradients are those of the descent itself
        let h = 1e-6;
        for r in 0..d.equalities.len() {
            for i in 0..4 {
                let (mut p, mut m) = (q, q);
                p[i] += h;
                m[i] -= h;
                let fd = (descending_node_constraints(k, &p, &c).unwrap().equalities[r].value
                    - descending_node_constraints(k, &m, &c).unwrap().equalities[r].value) / (2.0 * h);
                prop_assert!((fd - d.equalities[r].grad[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn the_pinned_node_sits_at_the_support(q in q(), c in ctx()) {
        let up = ascending_node_constraints(KeyNode::Q(2), &q, &c).unwrap();
        prop_assert_eq!(up.bounds.s, (c.lf, c.lf));
        let down = descending_node_constraints(KeyNode::Q(3), &q, &c).unwrap();
        prop_assert!((down.bounds.s.0 - (c.lf + c.lt)).abs() < 1e-12);
        prop_assert!((down.bounds.s.1 - (c.lf + c.lt)).abs() < 1e-12);
    }

    #[test]
    fn key_nodes_follow_progress(c in ctx(), dir in prop_oneof![Just(Direction::Ascending), Just(Direction::Descending)],
                                 mut s in prop::collection::vec(0.0..1.2f64, 2..20)) {
        s.sort_by(f64::total_cmp);
        let nodes: Vec<u8> = s.iter().map(|&x| node_for_progress(dir, x, &c, 0.01)).collect();
        prop_assert!(nodes.windows(2).all(|w| w[0] <= w[1]), "{:?}", nodes);
        prop_assert!(nodes.iter().all(|n| (1..=4).contains(n)));
    }

    #[test]
    fn simplified_sequences_are_well_formed(points in profile()) {
        let cfg = SimplifyConfig::default();
        let segs = match simplify(&points, &cfg) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        prop_assert!(!segs.is_empty());
        prop_assert_eq!(segs[0].p_start, points[0]);
        prop_assert_eq!(segs.last().unwrap().p_end, *points.last().unwrap());
        prop_assert_eq!(segs.last().unwrap().h_step, 0.0);
        for s in &segs {
            prop_assert!(s.p_start.d < s.p_end.d);
            prop_assert!((0.0..=1.0).contains(&s.sparsity), "sparsity {}", s.sparsity);
        }
        for w in segs.windows(2) {
            prop_assert!(w[0].p_end.d <= w[1].p_start.d);
            prop_assert!(w[1].p_start.d - w[0].p_end.d <= cfg.max_gap + 1e-9);
            prop_assert!((w[0].h_step - (w[1].p_start.h - w[0].p_end.h)).abs() < 1e-12);
        }
    }
}
