//! Field-level diffs between two combat states.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::statecore::CombatState;

/// One changed field. `combatant` is `None` for combat-level fields
/// (`turn_index`, `round`, `rng`, `status`, `bench`, and `order`, the list of
/// combatant ids). Field `*` with a null side records a combatant entering or
/// leaving the initiative list. Null stands for an absent field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateChange {
    pub combatant: Option<String>,
    pub field: String,
    pub old: Value,
    pub new: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeltaError {
    #[error("delta does not apply: {0}")]
    Mismatch(String),
    #[error("state (de)serialization failed: {0}")]
    Serde(String),
}

fn to_object(state: &CombatState) -> Map<String, Value> {
    match serde_json::to_value(state) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("CombatState serializes to an object"),
    }
}

fn split_combatants(obj: &mut Map<String, Value>) -> Vec<(String, Map<String, Value>)> {
    let list = match obj.remove("combatants") {
        Some(Value::Array(a)) => a,
        _ => Vec::new(),
    };
    list.into_iter()
        .filter_map(|v| match v {
            Value::Object(m) => {
                let id = m.get("id")?.as_str()?.to_string();
                Some((id, m))
            }
            _ => None,
        })
        .collect()
}

fn diff_objects(
    combatant: Option<&str>,
    old: &Map<String, Value>,
    new: &Map<String, Value>,
    out: &mut Vec<StateChange>,
) {
    let mut keys: Vec<&String> = old.keys().chain(new.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        let (o, n) = (old.get(k), new.get(k));
        if o != n {
            out.push(StateChange {
                combatant: combatant.map(str::to_string),
                field: k.clone(),
                old: o.cloned().unwrap_or(Value::Null),
                new: n.cloned().unwrap_or(Value::Null),
            });
        }
    }
}

/// Every field that differs between `pre` and `post`, combat-level first, then
/// combatants in post-state order, then removed combatants.
pub fn diff_states(pre: &CombatState, post: &CombatState) -> Vec<StateChange> {
    let (mut a, mut b) = (to_object(pre), to_object(post));
    let (ca, cb) = (split_combatants(&mut a), split_combatants(&mut b));
    let mut out = Vec::new();
    diff_objects(None, &a, &b, &mut out);
    let ids_a: Vec<&str> = ca.iter().map(|(id, _)| id.as_str()).collect();
    let ids_b: Vec<&str> = cb.iter().map(|(id, _)| id.as_str()).collect();
    if ids_a != ids_b {
        out.push(StateChange {
            combatant: None,
            field: "order".into(),
            old: ids_a.clone().into(),
            new: ids_b.clone().into(),
        });
    }
    let before: HashMap<&str, &Map<String, Value>> = ca.iter().map(|(id, m)| (id.as_str(), m)).collect();
    for (id, m) in &cb {
        match before.get(id.as_str()) {
            Some(old) => diff_objects(Some(id), old, m, &mut out),
            None => out.push(StateChange {
                combatant: Some(id.clone()),
                field: "*".into(),
                old: Value::Null,
                new: Value::Object(m.clone()),
            }),
        }
    }
    for (id, m) in &ca {
        if !ids_b.contains(&id.as_str()) {
            out.push(StateChange {
                combatant: Some(id.clone()),
                field: "*".into(),
                old: Value::Object(m.clone()),
                new: Value::Null,
            });
        }
    }
    out
}

fn set_field(obj: &mut Map<String, Value>, ch: &StateChange) -> Result<(), DeltaError> {
    let current = obj.get(&ch.field).cloned().unwrap_or(Value::Null);
    if current != ch.old {
        return Err(DeltaError::Mismatch(format!(
            "{}.{}: expected {} found {}",
            ch.combatant.as_deref().unwrap_or("combat"),
            ch.field,
            ch.old,
            current
        )));
    }
    if ch.new.is_null() {
        obj.remove(&ch.field);
    } else {
        obj.insert(ch.field.clone(), ch.new.clone());
    }
    Ok(())
}

/// Applies a delta produced by [`diff_states`] to `pre`, checking every old
/// value along the way.
pub fn apply_delta(pre: &CombatState, delta: &[StateChange]) -> Result<CombatState, DeltaError> {
    let mut root = to_object(pre);
    let list = split_combatants(&mut root);
    let mut order: Vec<String> = list.iter().map(|(id, _)| id.clone()).collect();
    let mut by_id: HashMap<String, Map<String, Value>> = list.into_iter().collect();
    for ch in delta {
        match (&ch.combatant, ch.field.as_str()) {
            (None, "order") => {
                order = serde_json::from_value(ch.new.clone())
                    .map_err(|e| DeltaError::Serde(e.to_string()))?;
            }
            (None, _) => set_field(&mut root, ch)?,
            (Some(id), "*") => match &ch.new {
                Value::Object(m) => {
                    by_id.insert(id.clone(), m.clone());
                }
                _ => {
                    by_id
                        .remove(id)
                        .ok_or_else(|| DeltaError::Mismatch(format!("{id} not present")))?;
                }
            },
            (Some(id), _) => {
                let obj = by_id
                    .get_mut(id)
                    .ok_or_else(|| DeltaError::Mismatch(format!("{id} not present")))?;
                set_field(obj, ch)?;
            }
        }
    }
    let combatants = order
        .iter()
        .map(|id| {
            by_id
                .remove(id)
                .map(Value::Object)
                .ok_or_else(|| DeltaError::Mismatch(format!("{id} in order but not present")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = by_id.keys().next() {
        return Err(DeltaError::Mismatch(format!("{extra} present but not in order")));
    }
    root.insert("combatants".into(), Value::Array(combatants));
    serde_json::from_value(Value::Object(root)).map_err(|e| DeltaError::Serde(e.to_string()))
}
