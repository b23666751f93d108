/// Smallest drop in windowed training loss that counts as improvement.
pub const LOSS_MARGIN: f64 = 1e-4;

/// Learning-rate schedule driven by evaluation results.
///
/// Two streaks are tracked: evaluations whose windowed training loss fails
/// to beat the best window so far by more than [`LOSS_MARGIN`], and
/// evaluations whose validation error rose since the previous one. When
/// either streak reaches `patience` the rate is divided by `factor` and both
/// streaks restart.
#[derive(Debug, Clone, PartialEq)]
pub struct Annealer {
    pub patience: usize,
    pub factor: f64,
    best_loss: Option<f64>,
    prev_error: Option<f64>,
    stalls: usize,
    rises: usize,
}

impl Annealer {
    pub fn new(patience: usize, factor: f64) -> Self {
        Self {
            patience,
            factor,
            best_loss: None,
            prev_error: None,
            stalls: 0,
            rises: 0,
        }
    }

    /// Current `(loss stall, validation rise)` streak lengths.
    pub fn streaks(&self) -> (usize, usize) {
        (self.stalls, self.rises)
    }

    /// Record one evaluation and return the learning rate to continue with.
    pub fn observe(&mut self, lr: f64, train_loss: f64, val_error: f64) -> f64 {
        let stalled = self
            .best_loss
            .is_some_and(|best| train_loss >= best - LOSS_MARGIN);
        let worse = self.prev_error.is_some_and(|prev| val_error > prev);
        self.best_loss = Some(self.best_loss.map_or(train_loss, |b| b.min(train_loss)));
        self.prev_error = Some(val_error);
        self.stalls = if stalled { self.stalls + 1 } else { 0 };
        self.rises = if worse { self.rises + 1 } else { 0 };
        if self.stalls >= self.patience || self.rises >= self.patience {
            self.stalls = 0;
            self.rises = 0;
            lr / self.factor
        } else {
            lr
        }
    }
}

/// Replay a history of `(train_loss, val_error)` evaluations from `lr`.
pub fn anneal(lr: f64, history: &[(f64, f64)], patience: usize, factor: f64) -> f64 {
    let mut a = Annealer::new(patience, factor);
    history
        .iter()
        .fold(lr, |lr, &(loss, err)| a.observe(lr, loss, err))
}
