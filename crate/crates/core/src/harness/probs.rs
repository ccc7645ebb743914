use rayon::prelude::*;

use super::output::ProbRow;
use crate::agents::{action_probabilities, AgentSnapshot};
use crate::domain::{ContextSpace, RngStream, StreamPurpose};
use crate::{Error, Result};

/// Selection probabilities of every frozen state for every context.
///
/// All snapshots must come from one run (same label and replication).
/// Each snapshot uses its own stream, so the result does not depend on
/// how snapshots are scheduled.
pub fn snapshot_probabilities(
    space: &ContextSpace,
    snapshots: &[AgentSnapshot],
    n_outer: usize,
    seed: u64,
) -> Result<Vec<ProbRow>> {
    if let Some(first) = snapshots.first() {
        if snapshots.iter().any(|s| s.label != first.label || s.rep != first.rep) {
            return Err(Error::InvalidInput("snapshots come from more than one run".into()));
        }
    }
    let per_snapshot = snapshots
        .par_iter()
        .map(|snap| {
            let mut rng = RngStream::replication(seed, snap.t, snap.rep, StreamPurpose::Probabilities);
            let mut rows = Vec::new();
            for context in space.contexts() {
                let probs = action_probabilities(&snap.policy, &context, n_outer, &mut rng)?;
                rows.extend(probs.probs.iter().enumerate().map(|(action, &p)| ProbRow {
                    t: snap.t,
                    context: context.index,
                    action,
                    p,
                }));
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_snapshot.into_iter().flatten().collect())
}
