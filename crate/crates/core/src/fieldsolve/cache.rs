use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::{solve, solve_key, ChipCrossSection, FieldMap, GridSpec, SolverSettings};
use crate::error::Result;

/// Memoises solved field maps by layout, grid and solver settings.
///
/// Two threads asking for the same key at once may both solve; the results
/// are identical and the second insert is dropped.
#[derive(Debug, Default, Clone)]
pub struct SolveCache {
    maps: Arc<Mutex<HashMap<String, Arc<FieldMap>>>>,
}

impl SolveCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&self, geometry: &ChipCrossSection, spec: &GridSpec, settings: &SolverSettings) -> Result<Arc<FieldMap>> {
        let key = solve_key(geometry, spec, settings);
        if let Some(m) = self.maps.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(m));
        }
        let map = Arc::new(solve(geometry, spec, settings)?);
        let mut guard = self.maps.lock().expect("cache lock");
        Ok(Arc::clone(guard.entry(key).or_insert(map)))
    }

    pub fn len(&self) -> usize {
        self.maps.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
