use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Rng;

/// Sampling range of one hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamRange {
    Uniform {
        low: f64,
        high: f64,
    },
    LogUniform {
        low: f64,
        high: f64,
    },
    /// Inclusive integer range.
    Integer {
        low: i64,
        high: i64,
    },
    Choice {
        values: Vec<f64>,
    },
}

impl ParamRange {
    fn check(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamRange::Uniform { low, high } => low <= high,
            ParamRange::LogUniform { low, high } => *low > 0.0 && low <= high,
            ParamRange::Integer { low, high } => low <= high,
            ParamRange::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("empty range for `{name}`")))
        }
    }

    fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            ParamRange::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            ParamRange::LogUniform { low, high } => {
                (low.ln() + (high.ln() - low.ln()) * rng.random::<f64>()).exp()
            }
            ParamRange::Integer { low, high } => rng.random_range(*low..=*high) as f64,
            ParamRange::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }
}

pub type SearchSpace = BTreeMap<String, ParamRange>;
pub type ParamDraw = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ParamDraw,
    pub best_score: f64,
    pub trace: Vec<(ParamDraw, f64)>,
}

/// Randomized search: `budget` independent draws from `space`, keeping the
/// highest-scoring one. The earliest draw wins ties; NaN scores never win.
pub fn random_search<F>(
    space: &SearchSpace,
    budget: usize,
    rng: &mut Rng,
    mut objective: F,
) -> Result<SearchResult>
where
    F: FnMut(&ParamDraw) -> Result<f64>,
{
    if space.is_empty() || budget == 0 {
        return Err(Error::EmptySpace);
    }
    for (name, range) in space {
        range.check(name)?;
    }
    let mut trace: Vec<(ParamDraw, f64)> = Vec::with_capacity(budget);
    let mut best: Option<usize> = None;
    for i in 0..budget {
        let draw: ParamDraw = space
            .iter()
            .map(|(k, r)| (k.clone(), r.draw(rng)))
            .collect();
        let score = objective(&draw)?;
        if best.is_none_or(|b: usize| score > trace[b].1 || trace[b].1.is_nan()) {
            best = Some(i);
        }
        trace.push((draw, score));
    }
    let b = best.expect("budget >= 1");
    Ok(SearchResult {
        best: trace[b].0.clone(),
        best_score: trace[b].1,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn space() -> SearchSpace {
        [
            (
                "lr".to_string(),
                ParamRange::LogUniform {
                    low: 1e-4,
                    high: 1e-1,
                },
            ),
            ("depth".to_string(), ParamRange::Integer { low: 1, high: 4 }),
            (
                "mix".to_string(),
                ParamRange::Uniform {
                    low: -1.0,
                    high: 1.0,
                },
            ),
        ]
        .into()
    }

    #[test]
    fn returns_argmax_of_trace() {
        let r = random_search(&space(), 30, &mut seeded_rng(1), |d| {
            Ok(-(d["mix"] - 0.3).powi(2))
        })
        .unwrap();
        assert_eq!(r.trace.len(), 30);
        assert!(r.trace.iter().all(|(_, s)| r.best_score >= *s));
        for (d, _) in &r.trace {
            assert!((1e-4..=1e-1).contains(&d["lr"]));
            assert!(d["depth"].fract() == 0.0 && (1.0..=4.0).contains(&d["depth"]));
        }
        let again = random_search(&space(), 30, &mut seeded_rng(1), |d| {
            Ok(-(d["mix"] - 0.3).powi(2))
        })
        .unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn single_draw_and_empty_space() {
        let r = random_search(&space(), 1, &mut seeded_rng(2), |_| Ok(0.5)).unwrap();
        assert_eq!(r.best, r.trace[0].0);
        assert!(matches!(
            random_search(&SearchSpace::new(), 3, &mut seeded_rng(2), |_| Ok(0.0)),
            Err(Error::EmptySpace)
        ));
        assert!(matches!(
            random_search(&space(), 0, &mut seeded_rng(2), |_| Ok(0.0)),
            Err(Error::EmptySpace)
        ));
    }
}
