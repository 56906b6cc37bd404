//! Seeded synthetic corpora used for pretraining and for checking the
//! recommend-then-ensemble path. Every series is a pure function of its
//! index, so the corpora can be regenerated instead of shipped as data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluation::{EvalConfig, Strategy};
use crate::series::TimeSeries;
use crate::synthetic::{generate_synthetic, SyntheticSpec};
use crate::Scalar;

pub const META_CORPUS_SIZE: usize = 300;
pub const REGIME_CORPUS_SIZE: usize = 60;
const META_SEED_BASE: u64 = 0;
const REGIME_SEED_BASE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Seasonal,
    Trend,
    Noise,
    LevelShift,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Seasonal, Regime::Trend, Regime::Noise, Regime::LevelShift];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Seasonal => "seasonal",
            Regime::Trend => "trend",
            Regime::Noise => "noise",
            Regime::LevelShift => "level_shift",
        }
    }

    /// Methods suited to the regime.
    pub fn family(self) -> &'static [&'static str] {
        match self {
            Regime::Seasonal => &["seasonal_naive", "holt_winters", "theta"],
            Regime::Trend => &["linear_trend", "drift", "holt", "theta"],
            Regime::Noise => &["mean", "ses", "ar_ls"],
            Regime::LevelShift => &["naive", "ses", "drift", "holt"],
        }
    }

    pub fn from_name(name: &str) -> Option<Regime> {
        Regime::ALL.into_iter().find(|r| r.name() == name)
    }
}

/// Random generator spec for `regime`; parameters are drawn from `rng`.
pub fn regime_spec(regime: Regime, rng: &mut impl Rng) -> SyntheticSpec {
    let length = 24 * rng.random_range(15..=25);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let base = SyntheticSpec {
        length,
        period: 0,
        trend_slope: 0.0,
        season_amp: 0.0,
        noise_sd: 0.3,
        level_shift_at: None,
        shift_size: None,
        channels: 1,
        cross_corr: None,
        level: rng.random_range(-5.0..20.0),
    };
    match regime {
        Regime::Seasonal => SyntheticSpec {
            period: [7, 12, 24][rng.random_range(0..3)],
            season_amp: rng.random_range(1.5..4.0),
            noise_sd: rng.random_range(0.1..0.6),
            trend_slope: rng.random_range(-0.005..0.005),
            ..base
        },
        Regime::Trend => SyntheticSpec {
            trend_slope: sign * rng.random_range(0.03..0.12),
            noise_sd: rng.random_range(0.2..1.0),
            ..base
        },
        Regime::Noise => SyntheticSpec { noise_sd: rng.random_range(0.5..2.0), ..base },
        Regime::LevelShift => SyntheticSpec {
            level_shift_at: Some((length as f64 * rng.random_range(0.35..0.6)) as usize),
            shift_size: Some(sign * rng.random_range(4.0..8.0)),
            noise_sd: rng.random_range(0.2..0.6),
            ..base
        },
    }
}

/// Series number `seed` of `regime`, tagged with the regime as its domain.
pub fn regime_series<T: Scalar>(regime: Regime, seed: u64, id: String) -> TimeSeries<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = regime_spec(regime, &mut rng);
    generate_synthetic(&spec, seed).expect("regime specs are valid").with_id(id).with_domain(regime.name())
}

/// The 300-series pretraining corpus; regimes cycle through [`Regime::ALL`].
pub fn meta_corpus<T: Scalar>() -> Vec<TimeSeries<T>> {
    (0..META_CORPUS_SIZE)
        .map(|i| regime_series(Regime::ALL[i % 4], META_SEED_BASE + i as u64, format!("meta-{i:03}")))
        .collect()
}

/// The 60-series check corpus, 15 per regime, seeded disjointly from [`meta_corpus`].
pub fn regime_corpus<T: Scalar>() -> Vec<TimeSeries<T>> {
    (0..REGIME_CORPUS_SIZE)
        .map(|i| {
            let regime = Regime::ALL[i / (REGIME_CORPUS_SIZE / 4)];
            regime_series(regime, REGIME_SEED_BASE + i as u64, format!("{}-{i:02}", regime.name()))
        })
        .collect()
}

/// Pure seasonal (period 12, no trend) or pure trend (no season) series.
pub fn toy_series<T: Scalar>(seasonal: bool, seed: u64) -> TimeSeries<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7079);
    let spec = if seasonal {
        SyntheticSpec {
            length: 360,
            period: 12,
            trend_slope: 0.0,
            season_amp: rng.random_range(2.0..4.0),
            noise_sd: 0.2,
            ..Default::default()
        }
    } else {
        SyntheticSpec {
            length: 360,
            period: 0,
            trend_slope: rng.random_range(0.04..0.1),
            season_amp: 0.0,
            noise_sd: 0.2,
            ..Default::default()
        }
    };
    let kind = if seasonal { "seasonal" } else { "trend" };
    generate_synthetic(&spec, seed)
        .expect("toy specs are valid")
        .with_id(format!("toy-{kind}-{seed}"))
        .with_domain(kind)
}

/// Evaluation settings used for pretraining and for the regime check:
/// rolling windows of 24 with stride 24.
pub fn pretrain_eval_config() -> EvalConfig {
    EvalConfig { strategy: Strategy::Rolling, horizon: 24, stride: Some(24), ..EvalConfig::default() }
}
