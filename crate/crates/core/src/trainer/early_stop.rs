/// Tracks the best validation score; earliest epoch wins ties.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: None, stale: 0 }
    }

    /// Records `score` for `epoch`; returns true if it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        match self.best {
            Some((_, b)) if score <= b => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, score));
                self.stale = 0;
                true
            }
        }
    }

    /// True once `patience` consecutive epochs have not improved.
    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|b| b.0)
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best.map(|b| b.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience() {
        let mut es = EarlyStopping::new(1);
        assert!(es.observe(1, 0.8));
        assert!(!es.should_stop());
        assert!(!es.observe(2, 0.7));
        assert!(es.should_stop());
        assert_eq!(es.best_epoch(), Some(1));
    }

    #[test]
    fn ties_keep_earliest() {
        let mut es = EarlyStopping::new(3);
        es.observe(1, 0.5);
        es.observe(2, 0.9);
        es.observe(3, 0.9);
        es.observe(4, 0.9);
        assert_eq!(es.best_epoch(), Some(2));
        assert!(!es.should_stop());
        es.observe(5, 0.1);
        assert!(es.should_stop());
    }
}
