//! Scratch timing harness (not committed).

use std::time::Instant;

use bugcast_core::features::build_exogenous;
use bugcast_core::models::{fit, FamilyParams, ForecasterSpec, LstmParams, RfParams};
use bugcast_core::series::{Release, ReleaseCalendar, SeriesLabel};
use bugcast_core::synth;
use chrono::NaiveDate;

fn main() {
    let values = synth::ar_process(&[0.72, 0.23], 522, 30.0, 7);
    let scaled: Vec<f64> = values.iter().map(|v| 192.0 + v).collect();
    let first = NaiveDate::from_ymd_opt(2010, 1, 4).unwrap();
    let series = synth::counts_series(&scaled, first, SeriesLabel::Arrival);
    let releases: Vec<Release> = (0..40)
        .map(|i| Release {
            version: format!("{}.0", 4 + i),
            release_date: first + chrono::Duration::weeks(i * 13),
        })
        .collect();
    let calendar = ReleaseCalendar::new(releases);
    let exog = build_exogenous(&series, &calendar);

    let train = series.prefix(371).unwrap();
    let train_exog = exog.prefix(371).unwrap();

    // Full LSTM fit at paper scale.
    let spec = ForecasterSpec::new(FamilyParams::Lstm(LstmParams::default())).with_seed(42);
    let t0 = Instant::now();
    let mut model = fit(&spec, &train, None).unwrap();
    println!("LSTM full fit (n=371, no exog): {:?}", t0.elapsed());

    let t0 = Instant::now();
    for k in 0..5 {
        let longer = series.prefix(372 + k).unwrap();
        model.refit(&longer, None).unwrap();
    }
    println!("LSTM warm refit x5: {:?} (per refit {:?})", t0.elapsed(), t0.elapsed() / 5);

    let spec_x = ForecasterSpec::new(FamilyParams::Lstm(LstmParams::default()))
        .with_exogenous()
        .with_seed(42);
    let t0 = Instant::now();
    let _ = fit(&spec_x, &train, Some(&train_exog)).unwrap();
    println!("LSTMx full fit (n=371): {:?}", t0.elapsed());

    // RF fit at paper scale.
    let spec_rf = ForecasterSpec::new(FamilyParams::Rf(RfParams::default())).with_seed(42);
    let t0 = Instant::now();
    let _ = fit(&spec_rf, &train, None).unwrap();
    println!("RF full fit (n=371): {:?}", t0.elapsed());

    let spec_rfx = ForecasterSpec::new(FamilyParams::Rf(RfParams::default()))
        .with_exogenous()
        .with_seed(42);
    let t0 = Instant::now();
    let _ = fit(&spec_rfx, &train, Some(&train_exog)).unwrap();
    println!("RFx full fit (n=371): {:?}", t0.elapsed());

    let spec_ar = ForecasterSpec::new(FamilyParams::Arima(Default::default())).with_seed(42);
    let t0 = Instant::now();
    let _ = fit(&spec_ar, &train, None).unwrap();
    println!("ARIMA full fit (n=371): {:?}", t0.elapsed());
}
