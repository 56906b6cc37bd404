use serde::{Deserialize, Serialize};

use crate::answer::QaAnswer;

/// Turns kept per session; older ones are dropped first.
pub const MAX_TURNS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub question: String,
    pub answer: QaAnswer,
}

/// Chronological question/answer history of one conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHistory {
    pub session_id: String,
    turns: Vec<Turn>,
}

impl SessionHistory {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self { session_id: session_id.into(), turns: Vec::new() }
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn push(&mut self, turn: Turn) {
        if self.turns.len() == MAX_TURNS {
            self.turns.remove(0);
        }
        self.turns.push(turn);
    }
}
