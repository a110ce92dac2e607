//! In-memory problems and sessions, mirrored to the journal.

use std::collections::HashMap;
use std::io;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use classtree::consult::Session;
use classtree::{HeuristicConfig, Problem};

use crate::journal::{Event, Journal};

pub type SessionHandle = Arc<tokio::sync::Mutex<SessionEntry>>;

#[derive(Debug, Clone)]
pub struct SessionEntry {
    pub id: String,
    pub problem_id: String,
    pub session: Session,
}

/// Problems are registered once and never change; each session sits behind
/// its own async mutex so answers to one session are applied in order.
#[derive(Debug, Default)]
pub struct Store {
    problems: RwLock<HashMap<String, Arc<Problem>>>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    journal: Option<Mutex<Journal>>,
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

impl Store {
    /// Store without persistence.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Store backed by the journal in `dir`, rebuilt from its events.
    pub fn open(dir: &Path) -> io::Result<Self> {
        let (journal, events) = Journal::open(dir)?;
        let mut store = Self {
            journal: Some(Mutex::new(journal)),
            ..Self::default()
        };
        for event in events {
            store.replay(event).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("journal replay: {e}"))
            })?;
        }
        Ok(store)
    }

    fn replay(&mut self, event: Event) -> Result<(), String> {
        match event {
            Event::Problem { id, problem } => {
                let problem = Problem::from_file(problem).map_err(|e| e.to_string())?;
                self.problems
                    .get_mut()
                    .expect("store lock poisoned")
                    .insert(id, Arc::new(problem));
            }
            Event::Session {
                id,
                problem_id,
                strategy,
                mode,
                entropy_rule,
            } => {
                let problem = self
                    .problem(&problem_id)
                    .ok_or_else(|| format!("session {id} refers to unknown problem {problem_id}"))?;
                let session = Session::new(problem, strategy, mode, HeuristicConfig { entropy_rule })
                    .map_err(|e| e.to_string())?;
                let entry = SessionEntry {
                    id: id.clone(),
                    problem_id,
                    session,
                };
                self.sessions
                    .get_mut()
                    .expect("store lock poisoned")
                    .insert(id, Arc::new(tokio::sync::Mutex::new(entry)));
            }
            Event::Answer {
                session,
                column,
                value,
            } => {
                let handle = self
                    .session(&session)
                    .ok_or_else(|| format!("answer for unknown session {session}"))?;
                let mut entry = handle.try_lock().expect("replay is single-threaded");
                // A recorded answer may legitimately end in no-match.
                let _ = entry.session.answer(column, value);
            }
            Event::Delete { session } => {
                self.sessions
                    .get_mut()
                    .expect("store lock poisoned")
                    .remove(&session);
            }
        }
        Ok(())
    }

    pub fn record(&self, event: &Event) -> io::Result<()> {
        match &self.journal {
            Some(j) => j.lock().expect("journal lock poisoned").append(event),
            None => Ok(()),
        }
    }

    pub fn problem(&self, id: &str) -> Option<Arc<Problem>> {
        self.problems.read().expect("store lock poisoned").get(id).cloned()
    }

    pub fn problem_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .problems
            .read()
            .expect("store lock poisoned")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    /// Journals then registers the problem under a fresh id.
    pub fn add_problem(&self, problem: Problem) -> io::Result<String> {
        let id = new_id();
        self.record(&Event::Problem {
            id: id.clone(),
            problem: problem.to_file(),
        })?;
        self.problems
            .write()
            .expect("store lock poisoned")
            .insert(id.clone(), Arc::new(problem));
        Ok(id)
    }

    pub fn session(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.read().expect("store lock poisoned").get(id).cloned()
    }

    pub fn sessions(&self) -> Vec<SessionHandle> {
        self.sessions
            .read()
            .expect("store lock poisoned")
            .values()
            .cloned()
            .collect()
    }

    /// Journals then registers an already started session.
    pub fn add_session(&self, problem_id: String, session: Session) -> io::Result<SessionHandle> {
        let id = new_id();
        self.record(&Event::Session {
            id: id.clone(),
            problem_id: problem_id.clone(),
            strategy: session.strategy(),
            mode: session.mode(),
            entropy_rule: session.config().entropy_rule,
        })?;
        let handle = Arc::new(tokio::sync::Mutex::new(SessionEntry {
            id: id.clone(),
            problem_id,
            session,
        }));
        self.sessions
            .write()
            .expect("store lock poisoned")
            .insert(id, handle.clone());
        Ok(handle)
    }

    pub fn remove_session(&self, id: &str) -> io::Result<bool> {
        let mut sessions = self.sessions.write().expect("store lock poisoned");
        if !sessions.contains_key(id) {
            return Ok(false);
        }
        self.record(&Event::Delete {
            session: id.to_string(),
        })?;
        sessions.remove(id);
        Ok(true)
    }
}
