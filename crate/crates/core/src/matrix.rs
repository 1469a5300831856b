//! The experimental design matrix. The shipped table has one row per
//! condition with the same eight columns as the published design table.

use std::sync::OnceLock;

use crate::corpus::{
    ConditionSpec, CorpusError, Discussion, GenerationMode, LengthPlan, OrderPlan, PersonaPlan,
    PoolPlan,
};

const SHIPPED_TSV: &str = include_str!("../assets/conditions.tsv");
pub const TSV_HEADER: [&str; 8] =
    ["Cond.", "Agents", "Persona", "Generation", "Discussion", "Pool", "Length", "Order"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMatrix {
    rows: Vec<ConditionSpec>,
}

impl ConditionMatrix {
    /// The 71-condition table. Rows carry no model assignment.
    pub fn shipped() -> &'static ConditionMatrix {
        static MATRIX: OnceLock<ConditionMatrix> = OnceLock::new();
        MATRIX.get_or_init(|| {
            ConditionMatrix::from_tsv(SHIPPED_TSV).expect("shipped condition table parses")
        })
    }

    pub fn from_tsv(text: &str) -> Result<Self, CorpusError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(CorpusError::Malformed { line: 1, reason: "empty table".into() })?;
        if header.split('\t').map(str::trim).collect::<Vec<_>>() != TSV_HEADER {
            return Err(CorpusError::Malformed {
                line: 1,
                reason: format!("expected columns {}", TSV_HEADER.join(", ")),
            });
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let cells: Vec<&str> = line.split('\t').collect();
            rows.push(parse_row(&cells).map_err(|reason| CorpusError::Malformed { line: i + 1, reason })?);
        }
        Ok(Self { rows })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = TSV_HEADER.join("\t");
        out.push('\n');
        for r in &self.rows {
            let cells = [
                r.condition_id.to_string(),
                r.team_size.to_string(),
                r.persona_plan.table_cell().into(),
                r.generation_mode.table_cell().into(),
                r.discussion.table_cell().into(),
                r.pool.table_cell().into(),
                r.length_plan.table_cell().into(),
                r.order_plan.table_cell().into(),
            ];
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> &[ConditionSpec] {
        &self.rows
    }

    pub fn row(&self, condition_id: u32) -> Option<&ConditionSpec> {
        self.rows.iter().find(|r| r.condition_id == condition_id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Parses the eight table cells of one row.
pub fn parse_row<S: AsRef<str>>(cells: &[S]) -> Result<ConditionSpec, String> {
    if cells.len() != 8 {
        return Err(format!("expected 8 cells, found {}", cells.len()));
    }
    let cell = |i: usize| cells[i].as_ref().trim();
    fn pick<T>(v: Option<T>, what: &str, raw: &str) -> Result<T, String> {
        v.ok_or_else(|| format!("bad {what} cell {raw:?}"))
    }
    Ok(ConditionSpec {
        condition_id: cell(0).parse().map_err(|_| format!("bad condition id {:?}", cell(0)))?,
        team_size: cell(1).parse().map_err(|_| format!("bad team size {:?}", cell(1)))?,
        persona_plan: pick(PersonaPlan::from_table_cell(cell(2)), "persona", cell(2))?,
        generation_mode: pick(GenerationMode::from_table_cell(cell(3)), "generation", cell(3))?,
        discussion: pick(Discussion::from_table_cell(cell(4)), "discussion", cell(4))?,
        pool: pick(PoolPlan::from_table_cell(cell(5)), "pool", cell(5))?,
        length_plan: pick(LengthPlan::from_table_cell(cell(6)), "length", cell(6))?,
        order_plan: pick(OrderPlan::from_table_cell(cell(7)), "order", cell(7))?,
        model_assignment: Vec::new(),
    })
}

impl ConditionSpec {
    pub fn with_models(&self, models: Vec<String>) -> ConditionSpec {
        ConditionSpec { model_assignment: models, ..self.clone() }
    }
}
