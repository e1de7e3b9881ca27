use std::path::Path;

use serde::Serialize;

use crate::cache::{cache_path, read_cache, write_cache};
use crate::error::{Error, Result};
use crate::patterns::{build_forbidden_set, ForbiddenSet, MAX_LEVEL};
use crate::statespace::{build_state_space, build_transitions, Limits, StateSpace, TransitionTable};

/// Everything built for one level: `F_n`, the state space and its transitions.
#[derive(Debug, Clone)]
pub struct Level {
    pub forbidden: ForbiddenSet,
    pub states: StateSpace,
    pub table: TransitionTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Built,
    /// A cache file existed but could not be used.
    Rebuilt,
    Disabled,
}

impl Level {
    pub fn build(n: usize, limits: &Limits) -> Result<Level> {
        if n == 0 || n > MAX_LEVEL {
            return Err(Error::LevelTooLarge {
                level: n,
                max: MAX_LEVEL,
            });
        }
        let forbidden = build_forbidden_set(n)?;
        let states = build_state_space(n, &forbidden.restrict(n - 1)?, limits)?;
        let table = build_transitions(&states, &forbidden)?;
        Ok(Level {
            forbidden,
            states,
            table,
        })
    }

    pub fn level(&self) -> usize {
        self.states.level()
    }

    /// Load from `cache_dir` when a valid file exists, otherwise build and store it.
    pub fn load_or_build(
        n: usize,
        cache_dir: Option<&Path>,
        limits: &Limits,
    ) -> Result<(Level, CacheStatus)> {
        let Some(dir) = cache_dir else {
            return Ok((Level::build(n, limits)?, CacheStatus::Disabled));
        };
        let path = cache_path(dir, n);
        let existed = path.exists();
        if existed {
            if let Ok(level) = read_cache(&path, n) {
                return Ok((level, CacheStatus::Hit));
            }
        }
        let level = Level::build(n, limits)?;
        write_cache(&path, &level)?;
        let status = if existed {
            CacheStatus::Rebuilt
        } else {
            CacheStatus::Built
        };
        Ok((level, status))
    }
}
