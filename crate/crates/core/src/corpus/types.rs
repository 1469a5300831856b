use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CorpusError;

/// One of the creative problem-solving tasks shown to a team.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPrompt {
    pub task_id: String,
    pub premise: String,
    pub shared_instruction: String,
}

const SHARED_INSTRUCTION: &str = "You are collaborating with other team members to come up with one creative idea to {goal}. The idea will be evaluated on its creativity (i.e., it should be both novel and useful).";

impl TaskPrompt {
    pub fn new(task_id: &str, premise: &str, goal: &str) -> Self {
        Self {
            task_id: task_id.to_string(),
            premise: premise.to_string(),
            shared_instruction: SHARED_INSTRUCTION.replace("{goal}", goal),
        }
    }

    /// The six task domains used in the experiments.
    pub fn builtin() -> Vec<TaskPrompt> {
        vec![
            TaskPrompt::new(
                "plastic_waste",
                "Plastic waste is one of the biggest environmental problems of our lifetime.",
                "reduce plastic waste",
            ),
            TaskPrompt::new(
                "supply_chain",
                "Vulnerabilities within a supply chain could lead to uncontrolled costs and inefficient delivery schedules.",
                "make supply chains less vulnerable",
            ),
            TaskPrompt::new(
                "sorry_pandemic",
                "Imagine a new pandemic has emerged that is transmitted by saying the word \"sorry\".",
                "deal with this pandemic",
            ),
            TaskPrompt::new(
                "educational_inequality",
                "Educational inequality is the unequal distribution of academic resources to disadvantaged and marginalised groups.",
                "reduce educational inequality",
            ),
            TaskPrompt::new(
                "employee_attrition",
                "Voluntary attrition happens when an employee decides to leave the company, resulting in the reduction of valued talent in the workforce.",
                "reduce voluntary employee attrition",
            ),
            TaskPrompt::new(
                "singing_in_shower",
                "Imagine a new research study discovers that singing in the shower for 20 minutes or more is good for health.",
                "make use of this discovery",
            ),
        ]
    }

    pub fn builtin_by_id(task_id: &str) -> Option<TaskPrompt> {
        Self::builtin().into_iter().find(|t| t.task_id == task_id)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.premise.trim().is_empty() {
            return Err(CorpusError::invariant(&self.task_id, "task premise is empty"));
        }
        Ok(())
    }

    /// Premise followed by the shared instruction, as shown to every agent.
    pub fn full_prompt(&self) -> String {
        format!("{} {}", self.premise, self.shared_instruction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaSource {
    Generic,
    HumanDerived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub persona_id: String,
    pub description: String,
    pub source: PersonaSource,
}

impl Persona {
    /// Generic identity, numbered from 1.
    pub fn generic(agent_number: usize) -> Self {
        Self {
            persona_id: format!("generic-{agent_number}"),
            description: format!("You are Agent {agent_number}"),
            source: PersonaSource::Generic,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.source == PersonaSource::Generic {
            let ok = self
                .description
                .strip_prefix("You are Agent ")
                .is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()));
            if !ok {
                return Err(CorpusError::invariant(
                    &self.persona_id,
                    "generic persona must read \"You are Agent N\"",
                ));
            }
        } else if self.description.trim().is_empty() {
            return Err(CorpusError::invariant(&self.persona_id, "persona description is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningEffort {
    Low,
    High,
    Default,
}

impl ReasoningEffort {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::High => "high",
            Self::Default => "default",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_index: u32,
    pub model_name: String,
    pub temperature: Option<f64>,
    pub reasoning_effort: Option<ReasoningEffort>,
    pub persona: Persona,
}

impl AgentProfile {
    pub fn validate_team(agents: &[AgentProfile]) -> Result<(), CorpusError> {
        let mut seen = std::collections::BTreeSet::new();
        for a in agents {
            if !seen.insert(a.agent_index) {
                return Err(CorpusError::invariant(
                    &a.model_name,
                    format!("duplicate agent_index {}", a.agent_index),
                ));
            }
            if a.temperature.is_some() && a.reasoning_effort.is_some() {
                return Err(CorpusError::invariant(
                    &a.model_name,
                    "temperature and reasoning_effort are mutually exclusive",
                ));
            }
            a.persona.validate()?;
        }
        Ok(())
    }
}

macro_rules! cell_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $json:literal / $cell:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $json)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// Snake-case name used in JSON and CSV output.
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $json),+ }
            }

            /// Cell text as it appears in the design-matrix table.
            pub fn table_cell(self) -> &'static str {
                match self { $($name::$variant => $cell),+ }
            }

            pub fn from_table_cell(cell: &str) -> Option<Self> {
                let cell = cell.trim();
                $(if cell == $cell { return Some($name::$variant); })+
                None
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = CorpusError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $(if s == $json { return Ok($name::$variant); })+
                Self::from_table_cell(s).ok_or_else(|| CorpusError::UnknownValue {
                    kind: stringify!($name),
                    value: s.to_string(),
                })
            }
        }
    };
}

cell_enum!(PersonaPlan {
    None => "none" / "none",
    Same => "same" / "same",
    Different => "different" / "different",
});

cell_enum!(GenerationMode {
    Absent => "absent" / "-",
    Interactive => "interactive" / "interactive",
    Nominal => "nominal" / "nominal",
});

cell_enum!(Discussion {
    None => "none" / "-",
    Open => "open" / "open",
    Instructed => "instructed" / "instructed",
    Iterative => "iterative" / "iterative",
    Progressive => "progressive" / "progressive",
});

cell_enum!(
    /// Replacement pool. `NoPool` is an instructed discussion without a pool,
    /// `Absent` is any other protocol.
    PoolPlan {
        Absent => "absent" / "-",
        NoPool => "no" / "no",
        Top5 => "top5" / "top5",
    }
);

cell_enum!(LengthPlan {
    Absent => "absent" / "-",
    Fixed30 => "fixed30" / "30",
    Fixed60 => "fixed60" / "60",
    Cap60Min30 => "cap60_min30" / "60 (min 30)",
});

cell_enum!(OrderPlan {
    Absent => "absent" / "-",
    Fix => "fix" / "fix",
    Random => "random" / "random",
    Raise => "raise" / "raise",
});

impl PoolPlan {
    pub fn size(self) -> usize {
        match self {
            PoolPlan::Top5 => 5,
            _ => 0,
        }
    }
}

/// One experimental cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub condition_id: u32,
    pub team_size: u32,
    pub persona_plan: PersonaPlan,
    pub generation_mode: GenerationMode,
    pub discussion: Discussion,
    pub pool: PoolPlan,
    pub length_plan: LengthPlan,
    pub order_plan: OrderPlan,
    pub model_assignment: Vec<String>,
}

impl ConditionSpec {
    pub fn pool_size(&self) -> usize {
        self.pool.size()
    }

    /// The design columns only (everything except id and models).
    pub fn design(&self) -> DesignKey {
        DesignKey {
            team_size: self.team_size,
            persona_plan: self.persona_plan,
            generation_mode: self.generation_mode,
            discussion: self.discussion,
            pool: self.pool,
            length_plan: self.length_plan,
            order_plan: self.order_plan,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let id = format!("condition {}", self.condition_id);
        let fail = |reason: String| Err(CorpusError::invariant(&id, reason));
        if self.team_size != 3 && self.team_size != 6 {
            return fail(format!("team_size {} is not 3 or 6", self.team_size));
        }
        if self.pool == PoolPlan::Top5 && self.discussion != Discussion::Instructed {
            return fail("a replacement pool requires instructed discussion".into());
        }
        if (self.order_plan == OrderPlan::Absent) != (self.discussion == Discussion::None) {
            return fail("order_plan must be absent exactly when there is no discussion".into());
        }
        if self.discussion == Discussion::None && self.generation_mode == GenerationMode::Absent {
            return fail("no-discussion conditions need a generation phase".into());
        }
        if self.model_assignment.len() != self.team_size as usize {
            return fail(format!(
                "{} model names for a team of {}",
                self.model_assignment.len(),
                self.team_size
            ));
        }
        let matrix = crate::matrix::ConditionMatrix::shipped();
        let design = self.design();
        match matrix.row(self.condition_id) {
            Some(row) if row.design() != design => {
                fail("fields do not match the design-matrix row with this id".into())
            }
            Some(_) => Ok(()),
            None if matrix.rows().iter().any(|r| r.design() == design) => Ok(()),
            None => fail("field combination matches no design-matrix row".into()),
        }
    }
}

/// Design-matrix columns of a condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DesignKey {
    pub team_size: u32,
    pub persona_plan: PersonaPlan,
    pub generation_mode: GenerationMode,
    pub discussion: Discussion,
    pub pool: PoolPlan,
    pub length_plan: LengthPlan,
    pub order_plan: OrderPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Generation,
    Rating,
    Discussion,
    Synthesis,
    Divergent,
    Convergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Propose,
    Agree,
    Modify,
    Replace,
    Rate,
    Speak,
    Synthesize,
    RaiseHand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_index: u32,
    pub agent_index: u32,
    pub phase: Phase,
    pub action: Action,
    pub content: String,
    /// Parsed ratings, action arguments and protocol bookkeeping.
    pub payload: Option<Map<String, Value>>,
    pub token_count: Option<u64>,
}

impl Turn {
    pub fn is_rating(&self) -> bool {
        self.phase == Phase::Rating || self.action == Action::Rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdeaSource {
    LlmTeam,
    LlmSingle,
    HumanTeam,
}

impl IdeaSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LlmTeam => "llm_team",
            Self::LlmSingle => "llm_single",
            Self::HumanTeam => "human_team",
        }
    }
}

impl FromStr for IdeaSource {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm_team" => Ok(Self::LlmTeam),
            "llm_single" => Ok(Self::LlmSingle),
            "human_team" => Ok(Self::HumanTeam),
            _ => Err(CorpusError::UnknownValue { kind: "IdeaSource", value: s.into() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub conversation_id: Option<String>,
    pub condition_id: Option<u32>,
    pub task_id: String,
    pub source: IdeaSource,
}

/// Soft word target is 100; this is the enforced ceiling.
pub const HARMONIZED_MAX_WORDS: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Idea {
    pub idea_id: String,
    pub raw_text: String,
    pub harmonized_text: Option<String>,
    pub provenance: Provenance,
}

impl Idea {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if let Some(h) = &self.harmonized_text {
            let words = word_count(h);
            if words > HARMONIZED_MAX_WORDS {
                return Err(CorpusError::invariant(
                    &self.idea_id,
                    format!("harmonized text has {words} words (max {HARMONIZED_MAX_WORDS})"),
                ));
            }
        }
        Ok(())
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversationStatus {
    Completed,
    ProtocolFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTranscript {
    pub conversation_id: String,
    pub condition: ConditionSpec,
    pub task: TaskPrompt,
    pub seed: u64,
    pub turns: Vec<Turn>,
    pub final_idea: Option<Idea>,
    pub status: ConversationStatus,
}

impl ConversationTranscript {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let id = self.conversation_id.as_str();
        if self.turns.is_empty() {
            return Err(CorpusError::schema(id, "transcript has no turns"));
        }
        for (expected, turn) in self.turns.iter().enumerate() {
            if turn.turn_index as usize != expected {
                return Err(CorpusError::invariant(
                    id,
                    format!("turn_index {} found where {} expected", turn.turn_index, expected),
                ));
            }
            if !turn.is_rating() && turn.content.trim().is_empty() {
                return Err(CorpusError::invariant(
                    id,
                    format!("turn {} has empty content", turn.turn_index),
                ));
            }
        }
        match (self.status, &self.final_idea) {
            (ConversationStatus::Completed, None) => {
                return Err(CorpusError::invariant(id, "completed transcript lacks a final idea"));
            }
            (ConversationStatus::ProtocolFailure, Some(_)) => {
                return Err(CorpusError::invariant(id, "failed transcript carries a final idea"));
            }
            _ => {}
        }
        if let Some(idea) = &self.final_idea {
            idea.validate()?;
        }
        check_phase_order(self.condition.discussion, &self.turns)
            .map_err(|reason| CorpusError::invariant(id, reason))
    }

    /// Discussion-phase turns, the input to trajectory analysis.
    pub fn discussion_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.phase == Phase::Discussion)
    }
}

/// Phases admitted by each protocol, in stage order. A turn may stay in the
/// current stage or advance to the first later stage that admits its phase.
fn phase_stages(discussion: Discussion) -> &'static [&'static [Phase]] {
    use Phase::{Convergent, Divergent, Generation, Rating, Synthesis};
    const TALK: Phase = Phase::Discussion;
    match discussion {
        Discussion::None => &[&[Generation], &[Rating]],
        Discussion::Open => &[&[Generation], &[Rating], &[TALK], &[Synthesis]],
        Discussion::Instructed => &[&[Generation], &[Rating], &[TALK]],
        Discussion::Iterative => &[&[Generation], &[Rating], &[TALK, Rating]],
        Discussion::Progressive => &[&[Generation], &[Rating], &[Divergent], &[Convergent]],
    }
}

fn check_phase_order(discussion: Discussion, turns: &[Turn]) -> Result<(), String> {
    let stages = phase_stages(discussion);
    let mut stage = 0usize;
    for turn in turns {
        if stages[stage].contains(&turn.phase) {
            continue;
        }
        match (stage + 1..stages.len()).find(|&s| stages[s].contains(&turn.phase)) {
            Some(s) => stage = s,
            None => {
                return Err(format!(
                    "turn {} has phase {:?}, out of order for {} discussion",
                    turn.turn_index, turn.phase, discussion
                ))
            }
        }
    }
    let synthesis = turns.iter().filter(|t| t.phase == Phase::Synthesis).count();
    if synthesis > 1 {
        return Err(format!("{synthesis} synthesis turns"));
    }
    Ok(())
}

/// Raw judge scores for one idea. 0 means irrelevant to the task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRatingRow {
    pub idea_id: String,
    pub judge_id: String,
    pub novelty_raw: u8,
    pub usefulness_raw: u8,
}

impl JudgeRatingRow {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.novelty_raw > 10 || self.usefulness_raw > 10 {
            return Err(CorpusError::invariant(
                &self.idea_id,
                format!("judge {} rating outside 0-10", self.judge_id),
            ));
        }
        Ok(())
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: String,
    pub software_version: String,
    pub prompt_version: String,
    pub mode: String,
    pub master_seed: u64,
    pub conditions: Vec<u32>,
    pub conversations: Vec<ManifestEntry>,
    pub gateway_endpoints: Vec<String>,
    pub embedding_model_id: Option<String>,
    pub max_output_tokens: Option<u32>,
    /// The full run configuration, serialized as TOML.
    pub config: String,
    /// SHA-256 of each mock script file, keyed by path.
    pub script_digests: std::collections::BTreeMap<String, String>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub conversation_id: String,
    pub condition_id: u32,
    pub task_id: String,
    pub repetition: u32,
    pub seed: u64,
    pub model_plan: String,
}
