//! Prints both reward tables for the default mistake threshold.

use hhrl::model::{ChallengeLevel, FeedbackLevel, DEFAULT_MISTAKE_THRESHOLD};
use hhrl::rl::{lof_reward, lof_reward_bounds, loc_reward, normalize_lof_reward};

fn main() {
    let m_max = DEFAULT_MISTAKE_THRESHOLD;
    println!("challenge reward by level (rows) and mistakes (columns)");
    for c in 1..=5 {
        let row: Vec<String> =
            (0..=m_max + 1).map(|m| format!("{:>3}", loc_reward(ChallengeLevel::new(c).unwrap(), m, m_max))).collect();
        println!("  c={c} {}", row.join(" "));
    }

    println!("\nfeedback reward with one help request");
    for f in 1..=4 {
        let row: Vec<String> = (0..=m_max + 1)
            .map(|m| {
                let r = lof_reward(FeedbackLevel::new(f).unwrap(), m, 1, m_max).unwrap();
                format!("{r:>6.3}")
            })
            .collect();
        println!("  f={f} {}", row.join(" "));
    }

    let (lo, hi) = lof_reward_bounds(m_max);
    println!("\nfeedback reward range [{lo:.4}, {hi}), normalized: {:.3} .. {:.3}", normalize_lof_reward(lo, m_max), normalize_lof_reward(4.9, m_max));
}
