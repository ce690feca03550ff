//! Epsilon-greedy Q-learning on a toy three-armed bandit, then a snapshot
//! round trip.

use hhrl::rl::{greedy_policy, q_update, select_action, QTable, RlParams, TableId, TableSnapshot};
use hhrl::runner::seeded_rng;
use rand::Rng;

fn main() {
    let params = RlParams::default();
    let mut q = QTable::new(1, 3, params.q_init);
    let mut rng = seeded_rng(42, 0);
    let payout = [0.2, 0.5, 0.8];
    for episode in 0..2_000u64 {
        let eps = params.epsilon_after(episode);
        let a = select_action(&q, 0, eps, &mut rng);
        let r = if rng.gen::<f64>() < payout[a] { 1.0 } else { 0.0 };
        q_update(&mut q, 0, a, r, None, &params).unwrap();
    }
    println!("values {:?}", q.row(0));
    println!("visits {:?}", q.visit_counts());
    println!("greedy arm {}", greedy_policy(&q)[0]);

    let snap = TableSnapshot::capture(TableId::Lof, &QTable::for_table(TableId::Lof, 2, 0.0), params, Some(&rng));
    let back = TableSnapshot::from_json(&snap.to_json()).unwrap();
    assert_eq!(back, snap);
    println!("snapshot {} bytes", snap.to_json().len());
}
