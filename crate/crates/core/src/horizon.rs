/// Time discretization of one optimization run.
///
/// A horizon is a sequence of `steps` timesteps of `dt_hours` each, split into
/// equal periods. Without aggregation there is a single period spanning the
/// whole horizon and every step has weight 1. With typical periods, each
/// step carries the weight (number of represented original periods) of the
/// period it belongs to, and storage closes its cycle per period.
#[derive(Clone, Debug, PartialEq)]
pub struct Horizon {
    steps: usize,
    dt_hours: f64,
    period_length: usize,
    weights: Vec<f64>,
}

impl Horizon {
    /// Unweighted horizon of `steps` steps forming one period.
    pub fn new(steps: usize, dt_hours: f64) -> Self {
        assert!(steps >= 1, "horizon needs at least one step");
        assert!(dt_hours > 0.0 && dt_hours.is_finite(), "timestep must be positive");
        Self {
            steps,
            dt_hours,
            period_length: steps,
            weights: vec![1.0; steps],
        }
    }

    /// Horizon over `period_weights.len()` typical periods of `period_length` steps.
    pub fn typical_periods(period_length: usize, period_weights: &[f64], dt_hours: f64) -> Self {
        assert!(period_length >= 1 && !period_weights.is_empty());
        assert!(dt_hours > 0.0 && dt_hours.is_finite());
        let weights = period_weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w, period_length))
            .collect::<Vec<_>>();
        Self {
            steps: weights.len(),
            dt_hours,
            period_length,
            weights,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt_hours(&self) -> f64 {
        self.dt_hours
    }

    pub fn period_length(&self) -> usize {
        self.period_length
    }

    pub fn periods(&self) -> usize {
        self.steps / self.period_length
    }

    pub fn weight(&self, t: usize) -> f64 {
        self.weights[t]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted duration of step `t` in hours (`w_t · Δt`).
    pub fn step_hours(&self, t: usize) -> f64 {
        self.weights[t] * self.dt_hours
    }

    /// Real time represented by the horizon, in hours.
    pub fn represented_hours(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.dt_hours
    }

    /// Factor scaling horizon totals to one year of 8760 h.
    pub fn annualization_factor(&self) -> f64 {
        8760.0 / self.represented_hours()
    }
}
