use std::sync::{Arc, Mutex};

use super::{Session, Team};
use crate::corpus::{AgentProfile, Persona, TaskPrompt};
use crate::gateway::{ChatGateway, ChatRequest, FnGateway, RequestPurpose};
use crate::matrix::ConditionMatrix;

type Responder = dyn Fn(u32, &ChatRequest) -> String + Send + Sync;

/// Shared responder for all agents that logs every request.
#[derive(Clone)]
pub struct Script {
    f: Arc<Responder>,
    log: Arc<Mutex<Vec<(u32, ChatRequest)>>>,
}

impl Script {
    pub fn new(f: impl Fn(u32, &ChatRequest) -> String + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), log: Arc::default() }
    }

    pub fn gateway(&self, agent: u32) -> Arc<dyn ChatGateway> {
        let f = self.f.clone();
        let log = self.log.clone();
        Arc::new(FnGateway::new(move |req| {
            log.lock().unwrap().push((agent, req.clone()));
            f(agent, req)
        }))
    }

    pub fn prompts(&self, purpose: RequestPurpose) -> Vec<String> {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|(_, r)| r.purpose == purpose)
            .map(|(_, r)| r.last_user_message().unwrap_or_default().to_string())
            .collect()
    }
}

pub fn agents(n: u32) -> Vec<AgentProfile> {
    (0..n)
        .map(|i| AgentProfile {
            agent_index: i,
            model_name: "mock".into(),
            temperature: Some(1.0),
            reasoning_effort: None,
            persona: Persona::generic(i as usize + 1),
        })
        .collect()
}

pub fn scripted_session(condition_id: u32, script: Script) -> Session {
    let row = ConditionMatrix::shipped().row(condition_id).unwrap();
    let n = row.team_size;
    let condition = row.with_models(vec!["mock".into(); n as usize]);
    let gateways = (0..n).map(|a| script.gateway(a)).collect();
    let team = Team::new(agents(n), gateways, TaskPrompt::builtin_by_id("plastic_waste").unwrap()).unwrap();
    Session::new(condition, team, format!("test-c{condition_id}"), 7)
}
