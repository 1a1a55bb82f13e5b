use mmcoop::comms::{build_graph, receive_delayed, CommGraph, DelaySchedule, DelayShape, DelaySnapshot, EdgeDelay, StateHistory};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DT: f64 = 0.04;

fn published(n: usize, steps: usize) -> StateHistory {
    let mut h = StateHistory::new(vec![DVector::from_element(1, -1.0); n]);
    for m in 0..=steps {
        for i in 0..n {
            h.publish(i, m as f64 * DT, DVector::from_element(1, m as f64)).unwrap();
        }
    }
    h
}

proptest! {
    #[test]
    fn delayed_timestamp_lies_in_hold_window(step in 0usize..200, tau in 0.0f64..1.0, frac in 0.0f64..1.0) {
        let h = published(2, 200);
        let g = CommGraph::complete(2).unwrap();
        let t = step as f64 * DT;
        let d = tau * frac;
        let snap = DelaySnapshot::uniform(2, t, d);
        let got = receive_delayed(&h, &g, &snap, 0, 1, t).unwrap();
        match got.timestamp {
            Some(ts) => {
                prop_assert!(ts <= t - d + 1e-9);
                prop_assert!(ts >= t - d - DT - 1e-9);
                prop_assert_eq!(got.payload[0], (ts / DT).round());
            }
            None => prop_assert!(t - d < -1e-9),
        }
    }

    #[test]
    fn zero_delay_returns_current_sample(step in 0usize..200) {
        let h = published(3, 200);
        let g = CommGraph::complete(3).unwrap();
        let t = step as f64 * DT;
        let got = receive_delayed(&h, &g, &DelaySnapshot::zero(3, t), 2, 0, t).unwrap();
        prop_assert_eq!(got.payload[0], step as f64);
    }

    #[test]
    fn graph_accepted_iff_every_robot_has_an_in_neighbor(n in 1usize..7, bits in proptest::collection::vec(any::<bool>(), 36)) {
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|i| (0..n).map(|j| u8::from(i != j && bits[i * 6 + j])).collect())
            .collect();
        let has_isolated = rows.iter().any(|r| r.iter().all(|a| *a == 0));
        prop_assert_eq!(build_graph(&rows).is_ok(), !has_isolated);
    }

    #[test]
    fn laplacian_rows_sum_to_zero(n in 2usize..8, shift in 1usize..7) {
        let g = CommGraph::circulant(n, &[shift % n.max(2), 1]).unwrap();
        let l = g.laplacian();
        for i in 0..n {
            prop_assert_eq!(l.row(i).sum(), 0.0);
        }
        prop_assert_eq!(g.degree() - g.adjacency(), l);
    }

    #[test]
    fn sampled_delays_stay_within_bound(bound in 0.0f64..5.0, t in 0.0f64..60.0, seed in any::<u64>()) {
        let schedule = DelaySchedule {
            bound: 0.01,
            edges: vec![
                EdgeDelay { receiver: 0, sender: 1, shape: DelayShape::AbsRandom { amplitude: 0.01 } },
                EdgeDelay { receiver: 1, sender: 0, shape: DelayShape::Inverse { amplitude: 0.02 } },
                EdgeDelay { receiver: 1, sender: 2, shape: DelayShape::InverseLog { amplitude: 0.02 } },
                EdgeDelay { receiver: 2, sender: 0, shape: DelayShape::TimeExpDecay { amplitude: 1.0 } },
            ],
        }
        .with_bound(bound);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snap = schedule.sample(3, t, &mut rng);
        prop_assert!(snap.delays.iter().all(|d| (0.0..=bound).contains(d)));
    }
}

#[test]
fn degree_matrices_by_hand() {
    let g = build_graph(&[vec![0, 1, 1], vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
    assert_eq!(g.degree(), DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 1.0])));
    assert_eq!(g.out_degree(1), 2);
    assert_eq!(g.in_neighbors(0).collect::<Vec<_>>(), vec![1, 2]);
}
