//! Text-mode versions of the catalog games, and a console session loop.
//!
//! Each game is reduced to a single typed answer. Problems are generated from
//! (game, level, problem seed), the same triple an instruction act carries, so
//! a log is enough to reconstruct what the learner saw.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::EngineConfig;
use crate::controllers::{LearnerEvent, LearnerEventKind, MetaController};
use crate::error::Error;
use crate::model::{ActCategory, ActPayload, ChallengeLevel, GameKind, SarAct, SessionPhase};
use crate::runner::log::EventLog;
use crate::runner::{log_outcome, seeded_rng, Actor, EventPayload, LogHeader, LOG_SCHEMA};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextProblem {
    pub prompt: String,
    pub answer: String,
}

fn normalize(s: &str) -> String {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl TextProblem {
    pub fn check(&self, input: &str) -> bool {
        normalize(input) == normalize(&self.answer)
    }
}

/// Largest number used at each level.
fn ceiling(loc: ChallengeLevel) -> u32 {
    [5, 10, 20, 50, 100][loc.index()]
}

fn distinct_pair(rng: &mut ChaCha8Rng, max: u32) -> (u32, u32) {
    let a = rng.gen_range(1..=max);
    let mut b = rng.gen_range(1..=max);
    while b == a {
        b = rng.gen_range(1..=max);
    }
    (a, b)
}

const EMOTIONS: [(&str, [&str; 5]); 4] = [
    ("happy", ["smiling wide", "bouncing up and down", "humming a tune", "has bright sparkly eyes", "waves its antennae slowly"]),
    ("sad", ["crying", "has a frown", "is looking down at its feet", "sighs quietly", "sits alone in a corner"]),
    ("angry", ["stomping its feet", "has a red face", "crosses its arms", "squints and huffs", "turns away sharply"]),
    ("scared", ["hiding behind a rock", "shaking all over", "has wide eyes", "holds its breath", "steps back slowly"]),
];

/// Builds the problem for one instruction.
pub fn generate(game: &GameKind, loc: ChallengeLevel, seed: u64) -> TextProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = ceiling(loc);
    let level = loc.value() as usize;
    let (prompt, answer) = match game.name.as_str() {
        "Pack Moon-Rocks" => {
            let n = rng.gen_range(2..=max.max(3));
            let have = rng.gen_range(0..n);
            (format!("The box needs {n} moon-rocks. It already has {have}. How many more do you drag in?"), (n - have).to_string())
        }
        "Select Galaxy More" | "Select Galaxy Fewer" => {
            let (a, b) = distinct_pair(&mut rng, max);
            let more = game.name.ends_with("More");
            let pick = if (a > b) == more { "A" } else { "B" };
            let word = if more { "more" } else { "fewer" };
            (format!("Galaxy A has {a} stars. Galaxy B has {b} stars. Which galaxy has {word} stars? (A or B)"), pick.into())
        }
        "Select Planet" => {
            let mut shown: Vec<u32> = Vec::new();
            while shown.len() < 3 {
                let v = rng.gen_range(1..=max);
                if !shown.contains(&v) {
                    shown.push(v);
                }
            }
            let target_i = rng.gen_range(0..3);
            let target = shown[target_i];
            let ask = if level >= 3 && target > 1 {
                let x = rng.gen_range(1..target);
                format!("{x} + {}", target - x)
            } else {
                target.to_string()
            };
            let list = shown.iter().enumerate().map(|(i, v)| format!("{}) {v}", i + 1)).collect::<Vec<_>>().join("  ");
            (format!("Planets: {list}. Which planet shows {ask}? (1, 2 or 3)"), (target_i + 1).to_string())
        }
        "Feed Space Pets" => {
            let each = rng.gen_range(1..=max / 2 + 1);
            (format!("Share {} stars evenly between two alien pets. How many stars does each pet get?", each * 2), each.to_string())
        }
        "Pets on a Spaceship" => {
            let count = 2 + level;
            let mut nums: Vec<u32> = (1..=max.max(count as u32)).collect();
            nums.shuffle(&mut rng);
            nums.truncate(count);
            let decreasing = level >= 3 && rng.gen_bool(0.5);
            let mut sorted = nums.clone();
            sorted.sort_unstable();
            if decreasing {
                sorted.reverse();
            }
            let order = if decreasing { "from biggest to smallest" } else { "from smallest to biggest" };
            let show = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            (format!("Board the pets {order}: {}", show(&nums)), show(&sorted))
        }
        "Organize Moon-Rocks" => {
            let n = 3 + level;
            let target = rng.gen_range(1..=3u32.max(level as u32));
            let rocks: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=3u32.max(level as u32))).collect();
            let count = rocks.iter().filter(|&&r| r == target).count();
            let list = rocks.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            (format!("Moon-rocks: {list}. How many rocks have the number {target}?"), count.to_string())
        }
        "Organize Space Objects" => {
            let kinds = ["star", "moon", "comet"];
            let n = 2 + level;
            let objects: Vec<(&str, u32)> =
                (0..n).map(|_| (kinds[rng.gen_range(0..kinds.len())], rng.gen_range(1..=max.min(20)))).collect();
            let kind = objects[0].0;
            let total: u32 = objects.iter().filter(|o| o.0 == kind).map(|o| o.1).sum();
            let list = objects.iter().map(|(k, v)| format!("{v} {k}s")).collect::<Vec<_>>().join(", ");
            (format!("Boxes: {list}. How many {kind}s are there in total?"), total.to_string())
        }
        "Pattern Completion" => {
            let step = rng.gen_range(1..=level as u32);
            let start = rng.gen_range(0..=max / 2);
            let seq: Vec<u32> = (0..4).map(|i| start + i * step).collect();
            let shown = seq[..3].iter().map(u32::to_string).collect::<Vec<_>>().join(", ");
            (format!("Complete the pattern: {shown}, _"), seq[3].to_string())
        }
        "Identify Alien Emotion" => {
            let (emotion, cues) = EMOTIONS[rng.gen_range(0..EMOTIONS.len())];
            let names = EMOTIONS.iter().map(|e| e.0).collect::<Vec<_>>().join(", ");
            (format!("The alien {}. How does it feel? ({names})", cues[level - 1]), emotion.into())
        }
        _ => {
            let (a, b) = (rng.gen_range(0..=max), rng.gen_range(0..=max));
            (format!("{}: what is {a} + {b}?", game.name), (a + b).to_string())
        }
    };
    TextProblem { prompt, answer }
}

/// Result of a console session.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlaySummary {
    pub games_completed: u32,
    pub games_abandoned: u32,
    pub help_requests: u32,
    pub quit_early: bool,
}

fn say<W: Write>(out: &mut W, act: &SarAct) -> std::io::Result<()> {
    let tag = match act.category {
        ActCategory::Feedback => match act.feedback_level() {
            Some(l) => format!("feedback {}", l.value()),
            None => "feedback".into(),
        },
        ActCategory::Instruction => match act.instruction_loc() {
            Some((_, loc)) => format!("level {}", loc.value()),
            None => "instruction".into(),
        },
        other => format!("{other:?}").to_lowercase(),
    };
    writeln!(out, "robot [{tag}]: {}", act.utterance)
}

/// Plays one session on a console. Typed lines are answers; `help` asks for
/// a hint and `quit` ends the session early. With `log`, every record is
/// written as NDJSON.
pub fn play_session<R: BufRead, W: Write>(
    config: &EngineConfig,
    seed: u64,
    mut input: R,
    mut out: W,
    log: Option<&mut dyn Write>,
) -> Result<PlaySummary, Error> {
    config.validate()?;
    let mut rng = seeded_rng(seed, 0);
    let mut mc = MetaController::new(config.clone());
    let mut log = EventLog::new(log);
    log.push(
        0,
        0,
        Actor::System,
        EventPayload::Header(LogHeader {
            schema: LOG_SCHEMA.into(),
            seed,
            catalog: config.catalog.clone(),
            mistake_threshold: config.mistake_threshold,
            loc_params: config.loc,
            lof_params: config.lof,
            learner: None,
            assessment: None,
        }),
    )?;
    log.push(1, 0, Actor::System, EventPayload::SessionStart)?;

    let mut summary = PlaySummary::default();
    let mut problem: Option<TextProblem> = None;
    let mut kind = LearnerEventKind::SessionStart;
    let mut time = 0u64;
    loop {
        let event = LearnerEvent::new(kind, time);
        log.push(1, time, Actor::Learner, EventPayload::Learner(event.clone()))?;
        let outcome = mc.step(&event, &mut rng)?;
        log_outcome(&mut log, 1, time, &outcome, None, config.mistake_threshold)?;
        time += 1;
        for a in &outcome.resolved {
            match a.outcome {
                crate::model::AttemptOutcome::Completed => summary.games_completed += 1,
                _ => summary.games_abandoned += 1,
            }
        }
        for act in &outcome.acts {
            say(&mut out, act)?;
            if let Some(ActPayload::Instruction { game_id, loc, problem_seed, .. }) = &act.payload {
                let p = generate(&config.catalog[*game_id], *loc, *problem_seed);
                problem = Some(p);
            }
        }
        match mc.phase() {
            SessionPhase::Ended => break,
            SessionPhase::GameLoop => {
                if let Some(p) = &problem {
                    writeln!(out, "> {}", p.prompt)?;
                }
            }
            _ => {}
        }
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 || line.trim().eq_ignore_ascii_case("quit") {
            let t = mc.terminate_early();
            for e in t.episodes {
                log.push(1, time, Actor::System, EventPayload::Episode(e))?;
            }
            log.push(1, time, Actor::System, EventPayload::SessionEnd { early: true })?;
            log.flush()?;
            summary.quit_early = true;
            writeln!(out, "session ended early")?;
            return Ok(summary);
        }
        let answer = line.trim();
        kind = match mc.phase() {
            SessionPhase::ClosingInquiry => LearnerEventKind::InquiryResponse,
            _ if answer.eq_ignore_ascii_case("help") => {
                summary.help_requests += 1;
                LearnerEventKind::HelpRequest
            }
            _ => match &problem {
                Some(p) if p.check(answer) => LearnerEventKind::CorrectAnswer,
                _ => LearnerEventKind::Mistake,
            },
        };
    }
    log.push(1, time, Actor::System, EventPayload::SessionEnd { early: false })?;
    log.flush()?;
    writeln!(out, "session complete")?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_game_catalog;

    #[test]
    fn every_game_every_level_is_answerable_and_deterministic() {
        for game in default_game_catalog() {
            for v in 1..=5 {
                let loc = ChallengeLevel::new(v).unwrap();
                for seed in 0..50 {
                    let p = generate(&game, loc, seed);
                    assert!(p.check(&p.answer), "{}: {:?}", game.name, p);
                    assert!(!p.check("definitely wrong"));
                    assert_eq!(p, generate(&game, loc, seed));
                }
            }
        }
    }

    #[test]
    fn answers_are_normalized() {
        let p = TextProblem { prompt: String::new(), answer: "3 7 9".into() };
        assert!(p.check(" 3, 7,9 "));
        let p = TextProblem { prompt: String::new(), answer: "A".into() };
        assert!(p.check("a"));
    }

    #[test]
    fn harder_levels_use_bigger_numbers() {
        let catalog = default_game_catalog();
        let feed = &catalog[4];
        let max_at = |v| (0..200).map(|s| generate(feed, ChallengeLevel::new(v).unwrap(), s).answer.parse::<u32>().unwrap()).max().unwrap();
        assert!(max_at(5) > max_at(1));
    }
}
