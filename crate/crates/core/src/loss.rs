//! Composite control loss: data term, initial-position term and weighted
//! desired-trajectory residual.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_len, Error, Result};
use crate::nn::{Jet2, JetLoss};
use crate::signal::DesiredState;

/// Weight on the desired-trajectory term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Finite(f64),
    /// Keep only the desired-trajectory term.
    Infinite,
}

impl LambdaMode {
    pub fn finite(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(Self::Finite(lambda))
        } else {
            Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )))
        }
    }

    /// `(w_nn, w_i, w_d)` multiplying the three components.
    pub fn weights(self) -> (f64, f64, f64) {
        match self {
            Self::Finite(l) => (1.0, 1.0, l),
            Self::Infinite => (0.0, 0.0, 1.0),
        }
    }
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(l) => write!(f, "{l}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Self::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse lambda {s:?}")))
                .and_then(|v| {
                    if v.is_infinite() && v > 0.0 {
                        Ok(Self::Infinite)
                    } else {
                        Self::finite(v)
                    }
                }),
        }
    }
}

impl Serialize for LambdaMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(l) => serializer.serialize_f64(*l),
            Self::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) if v.is_infinite() && v > 0.0 => Ok(Self::Infinite),
            Raw::Num(v) => Self::finite(v).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mse_nn: f64,
    pub mse_i: f64,
    pub mse_d: f64,
    pub lambda_mode: LambdaMode,
    pub total: f64,
}

/// `(1/N) sum |x_train - x_pred / amplitude|^2`.
pub fn mse_nn(x_train: &[f64], x_pred: &[f64], amplitude: f64) -> Result<f64> {
    check_len(x_train.len(), x_pred.len())?;
    let n = x_train.len() as f64;
    Ok(x_train
        .iter()
        .zip(x_pred)
        .map(|(xt, xp)| (xt - xp / amplitude).powi(2))
        .sum::<f64>()
        / n)
}

/// Squared initial-position residual.
pub fn mse_i(x_pred_0: f64, x_desired_0: f64) -> f64 {
    (x_pred_0 - x_desired_0).powi(2)
}

/// Residual `(a_D - x_pred'') + (x_D - x_pred)` at one point.
#[inline]
fn desired_residual(jet: &Jet2, d: &DesiredState) -> f64 {
    (d.a - jet.d2) + (d.x - jet.val)
}

/// `(1/N) sum |(a_D - x_pred'') + (x_D - x_pred)|^2`.
pub fn mse_d(jets: &[Jet2], desired: &[DesiredState]) -> Result<f64> {
    check_len(jets.len(), desired.len())?;
    let n = jets.len() as f64;
    Ok(jets
        .iter()
        .zip(desired)
        .map(|(j, d)| desired_residual(j, d).powi(2))
        .sum::<f64>()
        / n)
}

pub fn total_loss(mse_nn: f64, mse_i: f64, mse_d: f64, mode: LambdaMode) -> LossBreakdown {
    let total = match mode {
        LambdaMode::Finite(l) => mse_nn + mse_i + l * mse_d,
        LambdaMode::Infinite => mse_d,
    };
    LossBreakdown {
        mse_nn,
        mse_i,
        mse_d,
        lambda_mode: mode,
        total,
    }
}

/// The full control loss over a shared collocation grid.
#[derive(Debug, Clone)]
pub struct ControlLoss {
    pub x_train: Vec<f64>,
    pub desired: Vec<DesiredState>,
    pub amplitude: f64,
    pub mode: LambdaMode,
}

impl ControlLoss {
    pub fn new(
        x_train: Vec<f64>,
        desired: Vec<DesiredState>,
        amplitude: f64,
        mode: LambdaMode,
    ) -> Result<Self> {
        check_len(x_train.len(), desired.len())?;
        if x_train.is_empty() {
            return Err(Error::InvalidConfig("empty collocation grid".into()));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidConfig("amplitude must be > 0".into()));
        }
        Ok(Self {
            x_train,
            desired,
            amplitude,
            mode,
        })
    }

    pub fn breakdown(&self, jets: &[Jet2]) -> Result<LossBreakdown> {
        check_len(self.x_train.len(), jets.len())?;
        let x_pred: Vec<f64> = jets.iter().map(|j| j.val).collect();
        Ok(total_loss(
            mse_nn(&self.x_train, &x_pred, self.amplitude)?,
            mse_i(jets[0].val, self.desired[0].x),
            mse_d(jets, &self.desired)?,
            self.mode,
        ))
    }
}

impl JetLoss for ControlLoss {
    type Output = LossBreakdown;

    fn evaluate(&self, jets: &[Jet2], adjoint: &mut [Jet2]) -> (f64, LossBreakdown) {
        let n = jets.len();
        let inv_n = 1.0 / n as f64;
        let (w_nn, w_i, w_d) = self.mode.weights();
        let amp = self.amplitude;

        let mut sum_nn = 0.0;
        let mut sum_d = 0.0;
        for i in 0..n {
            let j = &jets[i];
            let r_nn = self.x_train[i] - j.val / amp;
            let r_d = desired_residual(j, &self.desired[i]);
            sum_nn += r_nn * r_nn;
            sum_d += r_d * r_d;
            // d/d(val) of r_nn^2 is -2 r_nn / amp; r_d depends on val and d2 with slope -1.
            let g_d = -2.0 * w_d * r_d * inv_n;
            adjoint[i] = Jet2::new(-2.0 * w_nn * r_nn * inv_n / amp + g_d, 0.0, g_d);
        }
        let r_i = jets[0].val - self.desired[0].x;
        adjoint[0].val += 2.0 * w_i * r_i;

        let parts = total_loss(sum_nn * inv_n, r_i * r_i, sum_d * inv_n, self.mode);
        (parts.total, parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::DesiredSignal;

    #[test]
    fn mse_nn_examples() {
        assert_eq!(mse_nn(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap(), 0.0);
        assert_eq!(mse_nn(&[0.0, 0.0], &[2.0, 2.0], 2.0).unwrap(), 1.0);
        assert!((mse_nn(&[1.0, -1.0, 3.0], &[1.0, 1.0, 1.0], 1.0).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            mse_nn(&[1.0], &[1.0, 2.0], 1.0),
            Err(Error::LengthMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn mse_i_examples() {
        assert_eq!(mse_i(0.0, 0.0), 0.0);
        assert_eq!(mse_i(1.0, 0.0), 1.0);
        assert!((mse_i(0.3, 0.0) - 0.09).abs() < 1e-16);
    }

    #[test]
    fn mse_d_examples() {
        let sig = DesiredSignal::new(2.0).unwrap();
        let desired = sig.sample(&[0.0, 1.3]);
        let exact: Vec<Jet2> = desired.iter().map(|d| Jet2::new(d.x, d.v, d.a)).collect();
        assert_eq!(mse_d(&exact, &desired).unwrap(), 0.0);

        let zero = [Jet2::ZERO; 2];
        let grid = sig.sample(&[0.0, std::f64::consts::FRAC_PI_2]);
        assert_eq!(mse_d(&zero, &grid).unwrap(), 0.0);

        let jets = [Jet2::new(1.0, 0.0, 0.0); 2];
        let flat = [DesiredState {
            x: 0.0,
            v: 0.0,
            a: 0.0,
        }; 2];
        assert_eq!(mse_d(&jets, &flat).unwrap(), 1.0);

        assert!(mse_d(&jets, &flat[..1]).is_err());
    }

    #[test]
    fn total_loss_modes() {
        assert_eq!(total_loss(1.0, 2.0, 3.0, LambdaMode::Finite(1.0)).total, 6.0);
        assert_eq!(total_loss(1.0, 2.0, 3.0, LambdaMode::Finite(0.0)).total, 3.0);
        let inf = total_loss(1.0, 2.0, 3.0, LambdaMode::Infinite);
        assert_eq!(inf.total, 3.0);
        assert_eq!((inf.mse_nn, inf.mse_i, inf.mse_d), (1.0, 2.0, 3.0));
    }

    #[test]
    fn zero_network_cancels_on_full_grid() {
        let t = crate::sim::uniform_grid(30.0, 3000);
        for amp in [0.5, 1.0, 2.0, 5.0] {
            let desired = DesiredSignal::new(amp).unwrap().sample(&t);
            let zero = vec![Jet2::ZERO; t.len()];
            assert!(mse_d(&zero, &desired).unwrap() < 1e-20);
        }
    }

    #[test]
    fn lambda_parsing() {
        assert_eq!("inf".parse::<LambdaMode>().unwrap(), LambdaMode::Infinite);
        assert_eq!("1e3".parse::<LambdaMode>().unwrap(), LambdaMode::Finite(1000.0));
        assert!("-1".parse::<LambdaMode>().is_err());
        assert!("abc".parse::<LambdaMode>().is_err());
        let json = serde_json::to_string(&LambdaMode::Infinite).unwrap();
        assert_eq!(
            serde_json::from_str::<LambdaMode>(&json).unwrap(),
            LambdaMode::Infinite
        );
        assert_eq!(
            serde_json::from_str::<LambdaMode>("10").unwrap(),
            LambdaMode::Finite(10.0)
        );
    }

    #[test]
    fn control_loss_matches_component_functions() {
        let t: Vec<f64> = (0..9).map(|i| i as f64 * 0.7).collect();
        let desired = DesiredSignal::new(2.0).unwrap().sample(&t);
        let x_train: Vec<f64> = t.iter().map(|t| (0.9 * t).cos()).collect();
        let jets: Vec<Jet2> = t
            .iter()
            .map(|&t| Jet2::new(0.3 + t.sin(), t.cos(), -0.5 * t.sin()))
            .collect();
        for mode in [
            LambdaMode::Finite(0.0),
            LambdaMode::Finite(2.5),
            LambdaMode::Infinite,
        ] {
            let loss = ControlLoss::new(x_train.clone(), desired.clone(), 2.0, mode).unwrap();
            let mut adj = vec![Jet2::ZERO; jets.len()];
            let (value, parts) = loss.evaluate(&jets, &mut adj);
            let direct = loss.breakdown(&jets).unwrap();
            assert!((value - direct.total).abs() < 1e-14);
            assert!((parts.mse_nn - direct.mse_nn).abs() < 1e-14);
            assert!((parts.mse_i - direct.mse_i).abs() < 1e-14);
            assert!((parts.mse_d - direct.mse_d).abs() < 1e-14);
            assert!(adj.iter().all(|a| a.d1 == 0.0));
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn total_is_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0,
                             bump in 0.0f64..5.0, lambda in 0.0f64..100.0) {
            let mode = LambdaMode::Finite(lambda);
            let base = total_loss(a, b, c, mode).total;
            prop_assert!(total_loss(a + bump, b, c, mode).total >= base);
            prop_assert!(total_loss(a, b + bump, c, mode).total >= base);
            prop_assert!(total_loss(a, b, c + bump, mode).total >= base);
        }

        #[test]
        fn components_are_non_negative(xs in prop::collection::vec(-5.0f64..5.0, 1..20),
                                       amp in 0.1f64..5.0) {
            let n = xs.len();
            let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let desired = DesiredSignal::new(amp).unwrap().sample(&t);
            let jets: Vec<Jet2> = xs.iter().map(|&x| Jet2::new(x, -x, x * x)).collect();
            let loss = ControlLoss::new(xs.iter().map(|x| x.sin()).collect(), desired, amp,
                                        LambdaMode::Finite(1.0)).unwrap();
            let b = loss.breakdown(&jets).unwrap();
            prop_assert!(b.mse_nn >= 0.0 && b.mse_i >= 0.0 && b.mse_d >= 0.0 && b.total >= 0.0);
        }
    }
}
