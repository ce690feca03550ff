//! Drives one session by hand and prints every robot act.

use hhrl::config::EngineConfig;
use hhrl::controllers::{LearnerEvent, LearnerEventKind, MetaController};
use hhrl::model::SessionPhase;
use hhrl::runner::seeded_rng;

fn main() {
    let mut rng = seeded_rng(1, 0);
    let mut mc = MetaController::new(EngineConfig::default());
    mc.reset_for_next_session().unwrap();
    let script = [LearnerEventKind::Mistake, LearnerEventKind::HelpRequest, LearnerEventKind::CorrectAnswer];
    let mut turn = 0;
    let mut kind = LearnerEventKind::SessionStart;
    loop {
        let out = mc.step(&LearnerEvent::new(kind, turn), &mut rng).unwrap();
        for act in &out.acts {
            println!("{:>11?}  {}", act.category, act.utterance);
        }
        for e in &out.episodes {
            println!("             {:?} state {} action {} reward {:.3}", e.table, e.state, e.action, e.reward);
        }
        kind = match mc.phase() {
            SessionPhase::Ended => break,
            SessionPhase::ClosingInquiry => LearnerEventKind::InquiryResponse,
            _ => script[turn as usize % script.len()],
        };
        println!("    learner  {kind:?}");
        turn += 1;
    }
}
