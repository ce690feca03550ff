//! The two-level controller hierarchy.
//!
//! [`MetaController`] owns the session state machine and activates exactly one
//! lower-level controller per step: disclosure, promise, instruction
//! (challenge personalization), feedback (feedback personalization) or inquiry.
//! The Q-tables live on the meta-controller and persist across sessions.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{ConfigError, ContractViolation, ProtocolError};
use crate::model::{
    plan_session_games, ActCategory, ActPayload, AttemptOutcome, ChallengeLevel, FeedbackLevel,
    GameAttemptState, GameKind, SarAct, SessionPhase,
};
use crate::rl::{greedy_policy, lof_reward, loc_reward, q_update, select_action, QTable, TableId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerEventKind {
    SessionStart,
    CorrectAnswer,
    Mistake,
    HelpRequest,
    InquiryResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerEvent {
    pub kind: LearnerEventKind,
    #[serde(default)]
    pub timestamp: u64,
    /// Raw answer content, logged verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl LearnerEvent {
    pub fn new(kind: LearnerEventKind, timestamp: u64) -> Self {
        Self { kind, timestamp, payload: None }
    }

    pub fn with_payload(mut self, payload: impl Into<String>) -> Self {
        self.payload = Some(payload.into());
        self
    }
}

/// Which scripted (non-learning) controller to draw an utterance from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptKind {
    Disclosure,
    Promise,
    Fulfillment,
    Inquiry,
}

impl ScriptKind {
    pub fn category(self) -> ActCategory {
        match self {
            ScriptKind::Disclosure => ActCategory::Disclosure,
            ScriptKind::Promise | ScriptKind::Fulfillment => ActCategory::Promise,
            ScriptKind::Inquiry => ActCategory::Inquiry,
        }
    }
}

/// Utterance catalogs for the scripted controllers.
///
/// Templates may reference `{planet}` and `{games}` (games in the session).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptCatalog {
    pub planets: Vec<String>,
    pub disclosures: Vec<String>,
    pub promises: Vec<String>,
    pub fulfillments: Vec<String>,
    pub inquiries: Vec<String>,
}

impl Default for ScriptCatalog {
    fn default() -> Self {
        let owned = |items: &[&str]| items.iter().map(|s| (*s).to_string()).collect();
        Self {
            planets: owned(&["Zorbia", "Glimmer", "Nova Prime", "Tiberon", "Kestrel-9", "Luma"]),
            disclosures: owned(&[
                "My ship is low on star fuel. I need your help to reach planet {planet}.",
                "I got lost in an asteroid field and I need your help to fly to planet {planet}.",
                "My map is scrambled! I need your help to find the way to planet {planet}.",
                "I have been trying to get to planet {planet} all week, and I need your help.",
                "My engines only work when we solve puzzles together. Will you help me reach planet {planet}?",
            ]),
            promises: owned(&[
                "If we finish all the games today, I promise we will reach planet {planet}.",
                "Let's play all {games} games today. When we do, we will land on planet {planet}, I promise!",
                "I promise that if we complete all the games, my ship will make it to planet {planet}.",
                "We have {games} games to play. Finish all the games with me and we will get to planet {planet}.",
                "Help me with all the games today and I promise we will see planet {planet} up close.",
            ]),
            fulfillments: owned(&[
                "You did it! You finished all the games and we made it to planet {planet}. Thank you!",
                "Great work today! We reached planet {planet}, just like I promised.",
                "We landed on planet {planet}! I could not have done it without you.",
                "All the games are done and planet {planet} is right below us. You are a great co-pilot!",
                "Thanks to you, we made it to planet {planet}. What a trip!",
            ]),
            inquiries: owned(&[
                "What was the best part of your day today?",
                "What did you do today before we played?",
                "If you could visit any planet, what would it look like?",
                "What is something that made you laugh today?",
                "Who did you play with today, and what did you play?",
                "What would you like to do tomorrow?",
            ]),
        }
    }
}

impl ScriptCatalog {
    pub fn entries(&self, kind: ScriptKind) -> &[String] {
        match kind {
            ScriptKind::Disclosure => &self.disclosures,
            ScriptKind::Promise => &self.promises,
            ScriptKind::Fulfillment => &self.fulfillments,
            ScriptKind::Inquiry => &self.inquiries,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, list) in [
            ("scripts.planets", &self.planets),
            ("scripts.disclosures", &self.disclosures),
            ("scripts.promises", &self.promises),
            ("scripts.fulfillments", &self.fulfillments),
            ("scripts.inquiries", &self.inquiries),
        ] {
            if list.is_empty() {
                return Err(ConfigError::invalid(field, "script catalog is empty"));
            }
        }
        Ok(())
    }
}

/// Hint text per feedback level. Level 5 is the bail-out line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackHints {
    pub levels: Vec<String>,
    /// Optional per-game hints for levels 1-4, keyed by game name.
    pub per_game: BTreeMap<String, Vec<String>>,
}

pub const BAIL_OUT_UTTERANCE: &str = "Let's try something else.";

impl Default for FeedbackHints {
    fn default() -> Self {
        Self {
            levels: vec![
                "Let's look at the question again. What do we need to do?".into(),
                "Try counting out loud as you drag each one.".into(),
                "Not quite. Look carefully and try changing your answer a little.".into(),
                "Here is a big hint: let's go through it step by step together.".into(),
                BAIL_OUT_UTTERANCE.into(),
            ],
            per_game: BTreeMap::new(),
        }
    }
}

impl FeedbackHints {
    pub fn hint(&self, game: &GameKind, level: FeedbackLevel) -> &str {
        if !level.is_bail_out() {
            if let Some(h) = self.per_game.get(&game.name).and_then(|v| v.get(level.index())) {
                return h;
            }
        }
        &self.levels[level.index()]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.levels.len() != 5 {
            return Err(ConfigError::invalid("hints.levels", "expected exactly 5 hint levels"));
        }
        for (game, hints) in &self.per_game {
            if hints.len() != 4 {
                return Err(ConfigError::invalid(
                    format!("hints.per_game.{game}"),
                    "expected hints for levels 1-4",
                ));
            }
        }
        Ok(())
    }
}

/// Seeded rotation through script catalogs that never repeats the previous
/// pick for the same kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptRotation {
    last: BTreeMap<ScriptKind, usize>,
    last_planet: Option<usize>,
}

fn pick_avoiding<R: Rng + ?Sized>(len: usize, avoid: Option<usize>, rng: &mut R) -> usize {
    match avoid {
        Some(prev) if len > 1 => {
            let i = rng.gen_range(0..len - 1);
            if i >= prev {
                i + 1
            } else {
                i
            }
        }
        _ => rng.gen_range(0..len),
    }
}

impl ScriptRotation {
    pub fn next_planet<R: Rng + ?Sized>(&mut self, scripts: &ScriptCatalog, rng: &mut R) -> String {
        let i = pick_avoiding(scripts.planets.len(), self.last_planet, rng);
        self.last_planet = Some(i);
        scripts.planets[i].clone()
    }
}

/// What a scripted utterance may refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptContext {
    pub planet: String,
    pub games: usize,
}

pub fn scripted_act<R: Rng + ?Sized>(
    kind: ScriptKind,
    scripts: &ScriptCatalog,
    context: &ScriptContext,
    rotation: &mut ScriptRotation,
    rng: &mut R,
) -> Result<SarAct, ConfigError> {
    let entries = scripts.entries(kind);
    if entries.is_empty() {
        return Err(ConfigError::invalid(format!("scripts.{kind:?}"), "script catalog is empty"));
    }
    let i = pick_avoiding(entries.len(), rotation.last.get(&kind).copied(), rng);
    rotation.last.insert(kind, i);
    let utterance = entries[i]
        .replace("{planet}", &context.planet)
        .replace("{games}", &context.games.to_string());
    let mut act = SarAct::scripted(kind.category(), utterance);
    if kind == ScriptKind::Fulfillment {
        act.payload = Some(ActPayload::Fulfillment);
    }
    Ok(act)
}

/// A completed Q-learning backup, with enough context to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub table: TableId,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: Option<usize>,
    pub old_value: f64,
    pub new_value: f64,
    pub mistakes: u32,
    pub help_requests: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct PendingEpisode {
    state: usize,
    action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ActiveGame {
    attempt: GameAttemptState,
    pending_loc: Option<PendingEpisode>,
    pending_lof: Option<PendingEpisode>,
    last_feedback: Option<FeedbackLevel>,
}

/// Everything one call to [`MetaController::step`] produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub acts: Vec<SarAct>,
    pub episodes: Vec<EpisodeRecord>,
    /// Attempts that resolved during this step.
    pub resolved: Vec<GameAttemptState>,
    /// Attempts that started during this step.
    pub started: Vec<GameAttemptState>,
}

/// Result of an operator ending a session before it finished.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyTermination {
    pub interrupted: Option<GameAttemptState>,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaController {
    config: EngineConfig,
    phase: SessionPhase,
    sessions_started: u32,
    plan: VecDeque<GameKind>,
    active: Option<ActiveGame>,
    loc_table: QTable,
    lof_table: QTable,
    loc_episodes: u64,
    lof_episodes: u64,
    planet: String,
    rotation: ScriptRotation,
    inquiries_left: usize,
}

impl MetaController {
    pub fn new(config: EngineConfig) -> Self {
        let states = config.catalog.len();
        let loc_table = QTable::for_table(TableId::Loc, states, config.loc.q_init);
        let lof_table = QTable::for_table(TableId::Lof, states, config.lof.q_init);
        Self::with_tables(config, loc_table, lof_table)
    }

    /// Resumes with previously learned tables. Episode counters, and with them
    /// the exploration rates, are recovered from the tables' visit counts.
    pub fn with_tables(config: EngineConfig, loc_table: QTable, lof_table: QTable) -> Self {
        assert_eq!(loc_table.states(), config.catalog.len(), "challenge table rows != games");
        assert_eq!(lof_table.states(), config.catalog.len(), "feedback table rows != games");
        let loc_episodes = loc_table.total_visits();
        let lof_episodes = lof_table.total_visits();
        Self {
            config,
            phase: SessionPhase::OpeningDisclosure,
            sessions_started: 0,
            plan: VecDeque::new(),
            active: None,
            loc_table,
            lof_table,
            loc_episodes,
            lof_episodes,
            planet: String::new(),
            rotation: ScriptRotation::default(),
            inquiries_left: 0,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn loc_table(&self) -> &QTable {
        &self.loc_table
    }

    pub fn lof_table(&self) -> &QTable {
        &self.lof_table
    }

    pub fn sessions_started(&self) -> u32 {
        self.sessions_started
    }

    pub fn active_attempt(&self) -> Option<&GameAttemptState> {
        self.active.as_ref().map(|a| &a.attempt)
    }

    pub fn games_remaining(&self) -> usize {
        self.plan.len()
    }

    pub fn loc_epsilon(&self) -> f64 {
        self.config.loc.epsilon_after(self.loc_episodes)
    }

    pub fn lof_epsilon(&self) -> f64 {
        self.config.lof.epsilon_after(self.lof_episodes)
    }

    pub fn loc_policy(&self) -> Vec<ChallengeLevel> {
        greedy_policy(&self.loc_table).into_iter().map(ChallengeLevel::from_index).collect()
    }

    pub fn lof_policy(&self) -> Vec<FeedbackLevel> {
        greedy_policy(&self.lof_table).into_iter().map(FeedbackLevel::from_index).collect()
    }

    /// Re-arms an ended session so the next `SessionStart` opens a new one.
    pub fn reset_for_next_session(&mut self) -> Result<(), ContractViolation> {
        match self.phase {
            SessionPhase::Ended | SessionPhase::OpeningDisclosure => {
                self.phase = SessionPhase::OpeningDisclosure;
                Ok(())
            }
            phase => Err(ContractViolation(format!("session still running in phase {phase:?}"))),
        }
    }

    fn protocol_error(&self, event: &LearnerEvent) -> ProtocolError {
        ProtocolError { phase: self.phase, event: format!("{:?}", event.kind) }
    }

    /// Advances the session state machine by one learner event.
    ///
    /// An illegal event yields a [`ProtocolError`] and leaves the controller
    /// untouched.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        event: &LearnerEvent,
        rng: &mut R,
    ) -> Result<StepOutcome, ProtocolError> {
        use LearnerEventKind::*;
        let legal = match (self.phase, event.kind) {
            (SessionPhase::OpeningDisclosure, SessionStart) => true,
            (SessionPhase::GameLoop, CorrectAnswer | Mistake | HelpRequest) => self.active.is_some(),
            (SessionPhase::ClosingInquiry, InquiryResponse) => true,
            _ => false,
        };
        if !legal {
            return Err(self.protocol_error(event));
        }
        let mut out = StepOutcome::default();
        match event.kind {
            SessionStart => self.open_session(rng, &mut out),
            CorrectAnswer => self.on_answer(true, rng, &mut out),
            Mistake => self.on_answer(false, rng, &mut out),
            HelpRequest => self.on_help(rng, &mut out),
            InquiryResponse => self.on_inquiry_response(rng, &mut out),
        }
        debug_assert!(out.acts.iter().all(SarAct::is_well_formed));
        Ok(out)
    }

    fn script<R: Rng + ?Sized>(&mut self, kind: ScriptKind, rng: &mut R) -> SarAct {
        let context = ScriptContext {
            planet: self.planet.clone(),
            games: self.config.games_per_session,
        };
        scripted_act(kind, &self.config.scripts, &context, &mut self.rotation, rng)
            .expect("script catalogs validated with the config")
    }

    fn open_session<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut StepOutcome) {
        self.sessions_started += 1;
        self.plan.clear();
        while self.plan.len() < self.config.games_per_session {
            let block = plan_session_games(&self.config.catalog, rng)
                .expect("catalog validated with the config");
            let needed = self.config.games_per_session - self.plan.len();
            self.plan.extend(block.into_iter().take(needed));
        }
        self.planet = self.rotation.next_planet(&self.config.scripts, rng);

        self.phase = SessionPhase::OpeningDisclosure;
        out.acts.push(self.script(ScriptKind::Disclosure, rng));
        self.phase = SessionPhase::OpeningPromise;
        out.acts.push(self.script(ScriptKind::Promise, rng));
        self.phase = SessionPhase::GameLoop;
        self.next_game_or_close(rng, out);
    }

    fn next_game_or_close<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut StepOutcome) {
        if let Some(game) = self.plan.pop_front() {
            let loc = self.instruction_choose(&game, rng);
            let attempt = GameAttemptState::new(game.clone(), loc, self.config.mistake_threshold);
            out.started.push(attempt.clone());
            out.acts.push(SarAct::instruction(&game, loc, rng.gen()));
            self.active = Some(ActiveGame {
                attempt,
                pending_loc: Some(PendingEpisode { state: game.id, action: loc.index() }),
                pending_lof: None,
                last_feedback: None,
            });
        } else {
            self.phase = SessionPhase::ClosingPromiseFulfillment;
            out.acts.push(self.script(ScriptKind::Fulfillment, rng));
            self.phase = SessionPhase::ClosingInquiry;
            out.acts.push(self.script(ScriptKind::Inquiry, rng));
            self.inquiries_left = self.config.inquiries_per_session.saturating_sub(1);
        }
    }

    fn on_answer<R: Rng + ?Sized>(&mut self, correct: bool, rng: &mut R, out: &mut StepOutcome) {
        let mut active = self.active.take().expect("checked legal");
        let abandoned = if correct {
            active.attempt.complete().expect("active attempt is open");
            false
        } else {
            active.attempt.record_mistake().expect("active attempt is open")
        };
        if let Some(pending) = active.pending_lof.take() {
            out.episodes.push(self.close_feedback(pending, &active.attempt));
        }
        if correct || abandoned {
            if abandoned {
                let (level, act) = self.forced_feedback(&active.attempt.game);
                active.last_feedback = Some(level);
                out.acts.push(act);
            }
            self.resolve(active, rng, out);
        } else {
            self.give_feedback(active, rng, out);
        }
    }

    fn on_help<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut StepOutcome) {
        let mut active = self.active.take().expect("checked legal");
        active.attempt.record_help().expect("active attempt is open");
        if let Some(pending) = active.pending_lof.take() {
            out.episodes.push(self.close_feedback(pending, &active.attempt));
        }
        self.give_feedback(active, rng, out);
    }

    fn give_feedback<R: Rng + ?Sized>(
        &mut self,
        mut active: ActiveGame,
        rng: &mut R,
        out: &mut StepOutcome,
    ) {
        let (level, act) = self
            .feedback_choose(&active.attempt, rng)
            .expect("attempt is open during feedback");
        if !level.is_bail_out() {
            active.pending_lof = Some(PendingEpisode {
                state: active.attempt.game.id,
                action: level.index(),
            });
        }
        active.last_feedback = Some(level);
        out.acts.push(act);
        self.active = Some(active);
    }

    fn resolve<R: Rng + ?Sized>(&mut self, mut active: ActiveGame, rng: &mut R, out: &mut StepOutcome) {
        if let Some(pending) = active.pending_loc.take() {
            let next = self.plan.front().map(|g| g.id);
            out.episodes.push(self.close_instruction(pending, &active.attempt, next));
        }
        out.resolved.push(active.attempt);
        self.next_game_or_close(rng, out);
    }

    fn on_inquiry_response<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut StepOutcome) {
        if self.inquiries_left > 0 {
            self.inquiries_left -= 1;
            out.acts.push(self.script(ScriptKind::Inquiry, rng));
        } else {
            self.phase = SessionPhase::Ended;
        }
    }

    /// Instruction controller: picks the challenge level for `game`.
    pub fn instruction_choose<R: Rng + ?Sized>(&self, game: &GameKind, rng: &mut R) -> ChallengeLevel {
        if let Some(level) = self.config.fixed_loc {
            return level;
        }
        let action = select_action(&self.loc_table, game.id, self.loc_epsilon(), rng);
        ChallengeLevel::from_index(action)
    }

    /// Applies the challenge reward for a resolved attempt.
    pub fn instruction_close(
        &mut self,
        attempt: &GameAttemptState,
        next_state: Option<usize>,
    ) -> Result<EpisodeRecord, ContractViolation> {
        if !attempt.is_resolved() {
            return Err(ContractViolation("challenge episode closed on an unresolved attempt".into()));
        }
        let pending = PendingEpisode { state: attempt.game.id, action: attempt.loc.index() };
        Ok(self.close_instruction(pending, attempt, next_state))
    }

    fn close_instruction(
        &mut self,
        pending: PendingEpisode,
        attempt: &GameAttemptState,
        next_state: Option<usize>,
    ) -> EpisodeRecord {
        let reward = f64::from(loc_reward(attempt.loc, attempt.mistakes, self.config.mistake_threshold));
        let update = q_update(
            &mut self.loc_table,
            pending.state,
            pending.action,
            reward,
            next_state,
            &self.config.loc,
        )
        .expect("finite reward");
        self.loc_episodes += 1;
        EpisodeRecord {
            table: TableId::Loc,
            state: pending.state,
            action: pending.action,
            reward,
            next_state,
            old_value: update.old,
            new_value: update.new,
            mistakes: attempt.mistakes,
            help_requests: attempt.help_requests,
        }
    }

    fn forced_feedback(&self, game: &GameKind) -> (FeedbackLevel, SarAct) {
        let level = FeedbackLevel::BAIL_OUT;
        (level, SarAct::feedback(game, level, self.config.hints.hint(game, level)))
    }

    /// Feedback controller: forced bail-out once mistakes exceed the
    /// threshold, otherwise a learned level in 1-4.
    pub fn feedback_choose<R: Rng + ?Sized>(
        &self,
        attempt: &GameAttemptState,
        rng: &mut R,
    ) -> Result<(FeedbackLevel, SarAct), ContractViolation> {
        if attempt.over_threshold() {
            return Ok(self.forced_feedback(&attempt.game));
        }
        if attempt.outcome != AttemptOutcome::InProgress {
            return Err(ContractViolation("feedback requested for a finished attempt".into()));
        }
        let action = select_action(&self.lof_table, attempt.game.id, self.lof_epsilon(), rng);
        let level = FeedbackLevel::from_index(action);
        let hint = self.config.hints.hint(&attempt.game, level);
        Ok((level, SarAct::feedback(&attempt.game, level, hint)))
    }

    /// Applies the feedback reward for `level`, given the attempt counters
    /// after the learner's next response.
    pub fn feedback_close(
        &mut self,
        attempt: &GameAttemptState,
        level: FeedbackLevel,
    ) -> Result<Option<EpisodeRecord>, ContractViolation> {
        if level.is_bail_out() {
            return Ok(None);
        }
        let pending = PendingEpisode { state: attempt.game.id, action: level.index() };
        Ok(Some(self.close_feedback(pending, attempt)))
    }

    fn close_feedback(&mut self, pending: PendingEpisode, attempt: &GameAttemptState) -> EpisodeRecord {
        let level = FeedbackLevel::from_index(pending.action);
        let reward = lof_reward(level, attempt.mistakes, attempt.help_requests, self.config.mistake_threshold)
            .expect("learned levels are 1-4");
        let next_state = (!attempt.is_resolved()).then_some(pending.state);
        let update = q_update(
            &mut self.lof_table,
            pending.state,
            pending.action,
            reward,
            next_state,
            &self.config.lof,
        )
        .expect("finite reward");
        self.lof_episodes += 1;
        EpisodeRecord {
            table: TableId::Lof,
            state: pending.state,
            action: pending.action,
            reward,
            next_state,
            old_value: update.old,
            new_value: update.new,
            mistakes: attempt.mistakes,
            help_requests: attempt.help_requests,
        }
    }

    /// Ends the current session immediately. An unfinished game is closed
    /// only if it already exceeded the mistake threshold; otherwise its
    /// pending episodes are discarded without a table update.
    pub fn terminate_early(&mut self) -> EarlyTermination {
        let mut episodes = Vec::new();
        let interrupted = self.active.take().map(|mut active| {
            if active.attempt.over_threshold() {
                active.attempt.outcome = AttemptOutcome::Abandoned;
                if let Some(pending) = active.pending_loc.take() {
                    episodes.push(self.close_instruction(pending, &active.attempt, None));
                }
            }
            active.attempt
        });
        self.plan.clear();
        self.phase = SessionPhase::Ended;
        EarlyTermination { interrupted, episodes }
    }

    /// Last feedback level delivered in the running attempt.
    pub fn last_feedback(&self) -> Option<FeedbackLevel> {
        self.active.as_ref().and_then(|a| a.last_feedback)
    }
}
