use std::collections::HashMap;

use crate::model::{EntityId, RatingEvent};

/// `global mean + user offset + item offset`, each offset being the entity's
/// mean deviation from the global mean. An RMSE sanity floor, nothing more.
#[derive(Clone, Debug)]
pub struct BiasBaseline {
    global: f64,
    user_offset: HashMap<EntityId, f64>,
    item_offset: HashMap<EntityId, f64>,
    min: f64,
    max: f64,
}

impl BiasBaseline {
    pub fn fit(train: &[RatingEvent], rating_min: f64, rating_max: f64) -> Self {
        let values: Vec<f64> = train.iter().filter_map(|e| e.value).collect();
        let global = if values.is_empty() {
            (rating_min + rating_max) / 2.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        let mut users: HashMap<EntityId, (f64, usize)> = HashMap::new();
        let mut items: HashMap<EntityId, (f64, usize)> = HashMap::new();
        for e in train {
            if let Some(v) = e.value {
                let u = users.entry(e.user.clone()).or_default();
                u.0 += v - global;
                u.1 += 1;
                let i = items.entry(e.item.clone()).or_default();
                i.0 += v - global;
                i.1 += 1;
            }
        }
        let offsets = |m: HashMap<EntityId, (f64, usize)>| {
            m.into_iter()
                .map(|(k, (s, n))| (k, s / n as f64))
                .collect::<HashMap<_, _>>()
        };
        Self {
            global,
            user_offset: offsets(users),
            item_offset: offsets(items),
            min: rating_min,
            max: rating_max,
        }
    }

    pub fn predict(&self, user: &EntityId, item: &EntityId) -> f64 {
        let bu = self.user_offset.get(user).copied().unwrap_or(0.0);
        let bi = self.item_offset.get(item).copied().unwrap_or(0.0);
        (self.global + bu + bi).clamp(self.min, self.max)
    }
}
