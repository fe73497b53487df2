//! Random-search hyperparameter optimization for the trainable imputer:
//! a fixed budget of independent draws from declared ranges, scored by
//! validation MAE, argmin wins with ties broken by earliest trial.

use crate::error::{Error, Result};
use crate::imputers::{Hyperparameters, ImputerSpec};
use crate::rng::CounterRng;

/// Declared search ranges. Learning rate is drawn log-uniformly; list-valued
/// dimensions are drawn uniformly from the listed choices.
#[derive(Debug, Clone)]
pub struct HpoSpace {
    pub learning_rate: (f64, f64),
    pub ma_window_choices: Vec<usize>,
    pub mit_rate: (f64, f64),
    pub batch_choices: Vec<usize>,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for HpoSpace {
    fn default() -> Self {
        HpoSpace {
            learning_rate: (1e-4, 1e-2),
            ma_window_choices: vec![1, 3, 5, 9, 13, 17, 25, 33, 49],
            mit_rate: (0.05, 0.5),
            batch_choices: vec![16, 32, 64],
            epochs: 200,
            patience: 10,
        }
    }
}

impl HpoSpace {
    fn sample(&self, rng: &mut CounterRng) -> Hyperparameters {
        Hyperparameters {
            learning_rate: rng.log_uniform(self.learning_rate.0, self.learning_rate.1),
            epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_choices[rng.below(self.batch_choices.len())],
            mit_rate: rng.uniform(self.mit_rate.0, self.mit_rate.1),
            w_ort: 1.0,
            w_mit: 1.0,
            ma_window: self.ma_window_choices[rng.below(self.ma_window_choices.len())],
            shared_weights: true,
        }
    }
}

/// One evaluated configuration.
#[derive(Debug, Clone)]
pub struct Trial {
    pub hyperparameters: Hyperparameters,
    /// Validation MAE; infinite when the trial failed to train.
    pub val_mae: f64,
}

/// Search result: the winning spec plus the full trial log.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: ImputerSpec,
    pub best_index: usize,
    pub best_val_mae: f64,
    pub trials: Vec<Trial>,
}

/// Draw `budget` configurations, evaluate each with the objective (validation
/// MAE of a fitted model on the objective cell), and return the argmin.
/// Trials that fail to train score infinity; the search errors only if every
/// trial fails.
pub fn random_search(
    space: &HpoSpace,
    budget: usize,
    objective: impl Fn(&Hyperparameters) -> Result<f64>,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget < 1 {
        return Err(Error::InvalidInput(
            "hpo budget must be at least 1".into(),
        ));
    }
    let mut trials = Vec::with_capacity(budget);
    let mut best_index = usize::MAX;
    let mut best_val = f64::INFINITY;
    for trial_index in 0..budget {
        let mut rng = CounterRng::new(seed, &[0x48, trial_index as u64]);
        let hyper = space.sample(&mut rng);
        let val_mae = match objective(&hyper) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("hpo trial {trial_index} failed: {e}");
                f64::INFINITY
            }
        };
        if val_mae < best_val {
            best_val = val_mae;
            best_index = trial_index;
        }
        trials.push(Trial {
            hyperparameters: hyper,
            val_mae,
        });
    }
    if best_index == usize::MAX {
        return Err(Error::Training(
            "every hpo trial failed to train".into(),
        ));
    }
    Ok(SearchOutcome {
        best: ImputerSpec::adapted_linear(trials[best_index].hyperparameters.clone()),
        best_index,
        best_val_mae: best_val,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_one_returns_that_draw() {
        let outcome = random_search(&HpoSpace::default(), 1, |h| Ok(h.learning_rate), 7).unwrap();
        assert_eq!(outcome.trials.len(), 1);
        assert_eq!(outcome.best_index, 0);
        assert_eq!(
            outcome.best.hyperparameters.as_ref().unwrap(),
            &outcome.trials[0].hyperparameters
        );
    }

    #[test]
    fn winner_is_argmin_over_trials() {
        let outcome =
            random_search(&HpoSpace::default(), 16, |h| Ok(h.mit_rate), 3).unwrap();
        let min = outcome
            .trials
            .iter()
            .map(|t| t.val_mae)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(outcome.best_val_mae, min);
        assert_eq!(outcome.trials[outcome.best_index].val_mae, min);
    }

    #[test]
    fn same_seed_same_sequence_and_winner() {
        let run = |seed| random_search(&HpoSpace::default(), 8, |h| Ok(h.learning_rate), seed);
        let a = run(11).unwrap();
        let b = run(11).unwrap();
        assert_eq!(a.best_index, b.best_index);
        for (ta, tb) in a.trials.iter().zip(b.trials.iter()) {
            assert_eq!(ta.hyperparameters, tb.hyperparameters);
        }
    }

    #[test]
    fn ties_break_to_earliest_trial() {
        let outcome = random_search(&HpoSpace::default(), 5, |_| Ok(1.0), 3).unwrap();
        assert_eq!(outcome.best_index, 0);
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(random_search(&HpoSpace::default(), 0, |_| Ok(0.0), 1).is_err());
    }

    #[test]
    fn samples_stay_in_declared_ranges() {
        let space = HpoSpace::default();
        let outcome = random_search(&space, 32, |h| {
            assert!(h.learning_rate >= space.learning_rate.0 * 0.999);
            assert!(h.learning_rate <= space.learning_rate.1 * 1.001);
            assert!(space.ma_window_choices.contains(&h.ma_window));
            assert!(space.batch_choices.contains(&h.batch_size));
            assert!(h.mit_rate >= space.mit_rate.0 && h.mit_rate <= space.mit_rate.1);
            Ok(0.0)
        }, 5);
        assert!(outcome.is_ok());
    }
}
