//! Speaker role recognition: decide which diarization cluster is the
//! therapist by comparing perplexities under role-specific language models.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{perplexity_stats, LanguageModel, LmError};
use crate::scalar::Real;
use crate::types::{Cluster, Role, SpeakerTurn};

#[derive(Debug, Error)]
pub enum RoleError {
    #[error("cluster {0} has no text")]
    EmptyCluster(Cluster),
    #[error(transparent)]
    Lm(#[from] LmError),
}

/// Perplexities of one cluster's text under the two role models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolePerplexities<T> {
    pub therapist: T,
    pub client: T,
}

impl<T: Real> RolePerplexities<T> {
    pub fn preferred(&self) -> Role {
        if self.therapist <= self.client {
            Role::Therapist
        } else {
            Role::Client
        }
    }

    pub fn confidence(&self) -> T {
        (self.therapist - self.client).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleAssignment<T> {
    pub a: Role,
    pub b: Role,
    pub confidence_a: T,
    pub confidence_b: T,
}

impl<T: Copy> RoleAssignment<T> {
    pub fn role_of(&self, c: Cluster) -> Role {
        match c {
            Cluster::A => self.a,
            Cluster::B => self.b,
        }
    }

    pub fn cluster_of(&self, r: Role) -> Cluster {
        if self.a == r {
            Cluster::A
        } else {
            Cluster::B
        }
    }
}

/// Each cluster takes its lower-perplexity role; when both want the same
/// role, the cluster with the larger perplexity gap gets it and cluster A
/// wins exact ties.
pub fn assign_from_perplexities<T: Real>(a: RolePerplexities<T>, b: RolePerplexities<T>) -> RoleAssignment<T> {
    let (ra, rb) = (a.preferred(), b.preferred());
    let (ca, cb) = (a.confidence(), b.confidence());
    let (role_a, role_b) = if ra != rb {
        (ra, rb)
    } else if cb > ca {
        (rb.other(), rb)
    } else if ca > cb {
        (ra, ra.other())
    } else {
        (Role::Therapist, Role::Client)
    };
    RoleAssignment {
        a: role_a,
        b: role_b,
        confidence_a: ca,
        confidence_b: cb,
    }
}

pub fn cluster_perplexities<T: Real, M: LanguageModel<T> + ?Sized>(
    text: &[Vec<String>],
    therapist: &M,
    client: &M,
) -> Result<RolePerplexities<T>, LmError> {
    Ok(RolePerplexities {
        therapist: perplexity_stats(therapist, text, true)?.perplexity,
        client: perplexity_stats(client, text, true)?.perplexity,
    })
}

/// Score both clusters' text (one sentence per entry) and assign roles.
pub fn assign_roles<T: Real, M: LanguageModel<T> + ?Sized>(
    text_a: &[Vec<String>],
    text_b: &[Vec<String>],
    therapist: &M,
    client: &M,
) -> Result<RoleAssignment<T>, RoleError> {
    for (c, t) in [(Cluster::A, text_a), (Cluster::B, text_b)] {
        if t.iter().all(Vec::is_empty) {
            return Err(RoleError::EmptyCluster(c));
        }
    }
    let a = cluster_perplexities(text_a, therapist, client)?;
    let b = cluster_perplexities(text_b, therapist, client)?;
    Ok(assign_from_perplexities(a, b))
}

/// Per-cluster text with one sentence per turn.
pub fn cluster_text(turns: &[SpeakerTurn], c: Cluster) -> Vec<Vec<String>> {
    turns
        .iter()
        .filter(|t| t.cluster == c && !t.words.is_empty())
        .map(|t| t.tokens().map(str::to_string).collect())
        .collect()
}

/// Run role recognition on diarized, transcribed turns and label them.
pub fn label_turns<T: Real, M: LanguageModel<T> + ?Sized>(
    turns: &mut [SpeakerTurn],
    therapist: &M,
    client: &M,
) -> Result<RoleAssignment<T>, RoleError> {
    let a = cluster_text(turns, Cluster::A);
    let b = cluster_text(turns, Cluster::B);
    let assignment = assign_roles(&a, &b, therapist, client)?;
    for t in turns.iter_mut() {
        t.role = Some(assignment.role_of(t.cluster));
    }
    Ok(assignment)
}
