/// Time-dependent scalar input, used for both the nutrient and the
/// antibiotic energy densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingSignal {
    Constant { value: f64 },
    /// `offset + amplitude * sin(angular_frequency * t)` in continuous time.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        angular_frequency: f64,
    },
    /// `before` up to and including `switch_step`, `after` strictly beyond it.
    /// Evaluated on the integer step index, not on time.
    Step {
        switch_step: usize,
        before: f64,
        after: f64,
    },
}

impl ForcingSignal {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    /// Value at time `t`, reached at step index `step`.
    pub fn value_at(&self, t: f64, step: usize) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Sinusoid {
                offset,
                amplitude,
                angular_frequency,
            } => offset + amplitude * (angular_frequency * t).sin(),
            Self::Step {
                switch_step,
                before,
                after,
            } => {
                if step > switch_step {
                    after
                } else {
                    before
                }
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Sinusoid { .. } => "sinusoid",
            Self::Step { .. } => "step",
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Self::Constant { value } => value.is_finite(),
            Self::Sinusoid {
                offset,
                amplitude,
                angular_frequency,
            } => offset.is_finite() && amplitude.is_finite() && angular_frequency.is_finite(),
            Self::Step { before, after, .. } => before.is_finite() && after.is_finite(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_uses_time() {
        let s = ForcingSignal::Sinusoid {
            offset: 50.0,
            amplitude: 50.0,
            angular_frequency: 500.0,
        };
        assert_eq!(s.value_at(0.0, 7), 50.0);
        let quarter = std::f64::consts::FRAC_PI_2 / 500.0;
        assert!((s.value_at(quarter, 0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn step_switches_after_index() {
        let s = ForcingSignal::Step {
            switch_step: 500,
            before: 0.0,
            after: 100.0,
        };
        assert_eq!(s.value_at(1e9, 500), 0.0);
        assert_eq!(s.value_at(0.0, 501), 100.0);
    }

    #[test]
    fn constant_ignores_arguments() {
        let s = ForcingSignal::constant(10.0);
        assert_eq!(s.value_at(3.0, 9), 10.0);
        assert_eq!(s.kind(), "constant");
    }
}
