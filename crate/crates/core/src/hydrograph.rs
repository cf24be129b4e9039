//! Seeded synthetic daily hydrograph.
//!
//! Temperature and precipitation follow seasonal templates, streamflow is a
//! linear reservoir fed by rain, and each well relaxes toward a seasonal
//! equilibrium that sinks with a linear drought trend and is lifted by
//! recharge from recent precipitation. Observed levels carry Gaussian noise.
//!
//! The defaults describe a fast-responding aquifer: rain lifts the level by
//! several meters within days, so a forecaster that reads the recent
//! precipitation beats one that repeats yesterday's level.

use std::f64::consts::TAU;

use chrono::NaiveDate;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from;
use crate::timeseries::{Column, DailySeries, GROUNDWATER_PREFIX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WellSpec {
    pub name: String,
    /// Mean level in meters above sea level at the start of the record.
    pub base_level: f64,
    /// Half the peak-to-trough seasonal swing in meters.
    pub seasonal_amplitude: f64,
    /// Days by which the seasonal peak trails mid-winter.
    pub phase_lag_days: f64,
    /// Level change per year in meters (negative for a drought).
    pub trend_per_year: f64,
    /// Fraction of the gap to equilibrium closed per day.
    pub relaxation: f64,
    /// Meters of rise per millimeter of smoothed precipitation.
    pub recharge: f64,
    /// Daily persistence of the smoothed precipitation, in `[0, 1)`.
    pub recharge_memory: f64,
    /// Standard deviation of the measurement noise in meters.
    pub noise: f64,
}

impl Default for WellSpec {
    fn default() -> Self {
        Self {
            name: "a".into(),
            base_level: 40.0,
            seasonal_amplitude: 6.0,
            phase_lag_days: 60.0,
            trend_per_year: -1.0,
            relaxation: 0.2,
            recharge: 3.0,
            recharge_memory: 0.3,
            noise: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydrographSpec {
    pub start: NaiveDate,
    pub days: usize,
    pub seed: u64,
    pub mean_temperature: f64,
    pub temperature_amplitude: f64,
    /// Mean daily probability of rain; winter is wetter than summer.
    pub rain_probability: f64,
    /// Mean depth of a rainy day in millimeters.
    pub rain_depth: f64,
    /// Daily outflow fraction of the streamflow reservoir.
    pub reservoir_outflow: f64,
    pub base_flow: f64,
    pub wells: Vec<WellSpec>,
}

impl Default for HydrographSpec {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
            days: 1500,
            seed: 2021,
            mean_temperature: 16.0,
            temperature_amplitude: 8.0,
            rain_probability: 0.2,
            rain_depth: 8.0,
            reservoir_outflow: 0.15,
            base_flow: 3.0,
            wells: vec![WellSpec::default()],
        }
    }
}

impl HydrographSpec {
    pub fn validate(&self) -> Result<()> {
        if self.days < 2 {
            return Err(Error::Config("hydrograph needs at least two days".into()));
        }
        if self.wells.is_empty() {
            return Err(Error::Config("hydrograph needs at least one well".into()));
        }
        if !(0.0..=0.5).contains(&self.rain_probability) {
            return Err(Error::Config("rain_probability must lie in [0, 0.5]".into()));
        }
        if !(self.rain_depth > 0.0) || !(0.0..=1.0).contains(&self.reservoir_outflow) || self.base_flow < 0.0 {
            return Err(Error::Config("rain_depth, reservoir_outflow or base_flow out of range".into()));
        }
        for w in &self.wells {
            if w.name.is_empty() || !(0.0..=1.0).contains(&w.relaxation) || !(0.0..1.0).contains(&w.recharge_memory) || w.noise < 0.0 {
                return Err(Error::Config(format!("invalid well {:?}", w.name)));
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<DailySeries> {
        self.validate()?;
        let n = self.days;
        let dates: Vec<NaiveDate> = self.start.iter_days().take(n).collect();
        let season = |day: usize, lag: f64| ((day as f64 - lag) * TAU / 365.25).cos();

        let mut weather = rng_from(self.seed, &[1]);
        let temp_noise = Normal::new(0.0, 2.0).expect("positive sigma");
        let depth = Exp::new(1.0 / self.rain_depth).expect("positive rate");
        let mut temperature = Vec::with_capacity(n);
        let mut precipitation = Vec::with_capacity(n);
        for day in 0..n {
            // coldest around mid-January, wettest in winter
            let s = season(day, 15.0);
            temperature.push(self.mean_temperature - self.temperature_amplitude * s + temp_noise.sample(&mut weather));
            let p = self.rain_probability * (1.0 + 0.8 * s);
            let rain = if weather.random::<f64>() < p { depth.sample(&mut weather) } else { 0.0 };
            precipitation.push(rain);
        }

        let mut streamflow = Vec::with_capacity(n);
        let mut storage = 0.0;
        for &rain in &precipitation {
            storage += rain;
            let out = self.reservoir_outflow * storage;
            storage -= out;
            streamflow.push(self.base_flow + out);
        }

        let mut columns = vec![
            Column::new("temp", temperature),
            Column::new("precip", precipitation.clone()),
            Column::new("streamflow", streamflow),
        ];
        for (w, spec) in self.wells.iter().enumerate() {
            let mut rng = rng_from(self.seed, &[2, w as u64]);
            let noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
            let mut recharge_pool = 0.0;
            let mut level = spec.base_level + spec.seasonal_amplitude * season(0, spec.phase_lag_days);
            let mut observed = Vec::with_capacity(n);
            for (day, &rain) in precipitation.iter().enumerate() {
                let equilibrium = spec.base_level
                    + spec.seasonal_amplitude * season(day, spec.phase_lag_days)
                    + spec.trend_per_year * day as f64 / 365.25;
                // infiltration reaches the aquifer a day after the rain
                level += spec.relaxation * (equilibrium - level) + spec.recharge * recharge_pool;
                recharge_pool = spec.recharge_memory * recharge_pool + (1.0 - spec.recharge_memory) * rain;
                let obs = if spec.noise > 0.0 { level + noise.sample(&mut rng) } else { level };
                observed.push(obs);
            }
            columns.push(Column::new(format!("{GROUNDWATER_PREFIX}{}", spec.name), observed));
        }
        DailySeries::new(dates, columns)
    }
}
