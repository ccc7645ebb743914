use serde::{Deserialize, Serialize};

use super::Context;

/// Working treatment embedding `Z = h(G)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Embedding {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub t: usize,
    pub context: Context,
    pub action: usize,
    pub embedding: Embedding,
    pub reward: f64,
}

/// Append-only interaction log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    interactions: Vec<Interaction>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an interaction. Panics if `t` does not strictly increase.
    pub fn push(&mut self, interaction: Interaction) {
        if let Some(last) = self.interactions.last() {
            assert!(
                interaction.t > last.t,
                "history time must increase ({} after {})",
                interaction.t,
                last.t
            );
        }
        self.interactions.push(interaction);
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interaction> {
        self.interactions.iter()
    }

    pub fn as_slice(&self) -> &[Interaction] {
        &self.interactions
    }

    /// Interactions recorded for `(context, action)`, in time order.
    pub fn filter(&self, context: &Context, action: usize) -> Vec<&Interaction> {
        self.interactions
            .iter()
            .filter(|i| i.context.index == context.index && i.action == action)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ContextSpace;
    use proptest::prelude::*;

    fn interaction(space: &ContextSpace, t: usize, ctx: usize, action: usize) -> Interaction {
        Interaction {
            t,
            context: space.decode(ctx).unwrap(),
            action,
            embedding: Embedding(vec![t as f64]),
            reward: t as f64 * 0.5,
        }
    }

    #[test]
    fn filter_empty_history() {
        let space = ContextSpace::steps_and_location();
        let h = History::new();
        assert!(h.filter(&space.decode(0).unwrap(), 0).is_empty());
    }

    #[test]
    fn filter_selects_matching_in_order() {
        let space = ContextSpace::steps_and_location();
        let mut h = History::new();
        let plan = [(1, 0), (2, 1), (1, 0), (0, 0), (1, 1), (1, 0), (3, 2), (2, 0), (1, 2), (5, 4)];
        for (t, &(c, a)) in plan.iter().enumerate() {
            h.push(interaction(&space, t, c, a));
        }
        let ctx = space.decode(1).unwrap();
        let got: Vec<usize> = h.filter(&ctx, 0).iter().map(|i| i.t).collect();
        let oracle: Vec<usize> = plan
            .iter()
            .enumerate()
            .filter(|(_, &(c, a))| c == 1 && a == 0)
            .map(|(t, _)| t)
            .collect();
        assert_eq!(got, oracle);
        assert_eq!(got.len(), 3);
        assert!(h.filter(&ctx, 4).is_empty());
    }

    #[test]
    #[should_panic]
    fn non_increasing_time_panics() {
        let space = ContextSpace::steps_and_location();
        let mut h = History::new();
        h.push(interaction(&space, 3, 0, 0));
        h.push(interaction(&space, 3, 0, 0));
    }

    proptest! {
        #[test]
        fn append_preserves_prefix(plan in proptest::collection::vec((0usize..12, 0usize..5), 1..60)) {
            let space = ContextSpace::steps_and_location();
            let mut h = History::new();
            let mut snapshots = Vec::new();
            for (t, (c, a)) in plan.iter().enumerate() {
                h.push(interaction(&space, t, *c, *a));
                snapshots.push(h.clone());
            }
            for snap in snapshots {
                prop_assert_eq!(snap.as_slice(), &h.as_slice()[..snap.len()]);
            }
        }
    }
}
