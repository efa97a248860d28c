//! Learning statistics, smoothing, confidence intervals and ranking metrics.

use std::io::Write;

use thiserror::Error;

/// Default trailing window for learning curves.
pub const MOVING_WINDOW: usize = 100;
/// Normal 97.5% quantile.
pub const Z95: f64 = 1.96;
pub const IDEAL_RELEVANCE: f64 = 5.0;

pub const CSV_HEADER: [&str; 6] = ["run_id", "seed", "model", "episode", "metric", "value"];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("relevance list is empty")]
    EmptyList,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("window must be at least 1")]
    ZeroWindow,
    #[error("relevance {0} outside [0, ideal]")]
    RelevanceOutOfRange(f64),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Element `i` is the mean of the last `min(i + 1, window)` values.
pub fn moving_mean(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(MetricsError::ZeroWindow);
    }
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    // Each window sum is recomputed from scratch so results don't carry
    // accumulated round-off from a running total.
    Ok((0..series.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let w = &series[lo..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect())
}

pub fn dcg(relevances: &[f64]) -> Result<f64> {
    if relevances.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    Ok(relevances
        .iter()
        .enumerate()
        .map(|(i, r)| r / ((i + 2) as f64).log2())
        .sum())
}

/// DCG normalized by a slate of the same length at `ideal` relevance.
pub fn ndcg(relevances: &[f64], ideal: f64) -> Result<f64> {
    if let Some(&r) = relevances.iter().find(|r| !(0.0..=ideal).contains(*r)) {
        return Err(MetricsError::RelevanceOutOfRange(r));
    }
    let best = dcg(&vec![ideal; relevances.len()])?;
    Ok(dcg(relevances)? / best)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// `(mean, half_width)` of a normal-approximation 95% interval.
pub fn ci95(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(MetricsError::TooFewSamples(values.len()));
    }
    Ok((mean(values), Z95 * sample_std(values) / (values.len() as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub ret: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    pub reward: f64,
    pub loss: Option<f64>,
}

/// Everything recorded during one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    pub run_id: String,
    pub seed: u64,
    pub model: String,
    pub environment: String,
    pub episodes: Vec<EpisodeRecord>,
    pub steps: Vec<StepRecord>,
    /// Losses reported by end-of-episode updates, keyed by episode.
    pub episode_losses: Vec<(usize, f64)>,
    /// Further per-episode metrics (e.g. `ndcg`), keyed by episode.
    pub episode_metrics: Vec<(usize, String, f64)>,
}

impl RunStatistics {
    pub fn new(run_id: impl Into<String>, seed: u64, model: impl Into<String>, environment: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            seed,
            model: model.into(),
            environment: environment.into(),
            episodes: Vec::new(),
            steps: Vec::new(),
            episode_losses: Vec::new(),
            episode_metrics: Vec::new(),
        }
    }

    pub fn record_step(&mut self, reward: f64, loss: Option<f64>) {
        self.steps.push(StepRecord {
            episode: self.episodes.len(),
            reward,
            loss,
        });
    }

    /// Closes the current episode, summing the rewards recorded since the
    /// previous one.
    pub fn finish_episode(&mut self, loss: Option<f64>) {
        let episode = self.episodes.len();
        let (ret, steps) = self
            .steps
            .iter()
            .rev()
            .take_while(|s| s.episode == episode)
            .fold((0.0, 0), |(r, n), s| (r + s.reward, n + 1));
        self.episodes.push(EpisodeRecord { episode, ret, steps });
        if let Some(l) = loss {
            self.episode_losses.push((episode, l));
        }
    }

    /// Attaches a metric to the most recently finished episode.
    pub fn record_metric(&mut self, name: &str, value: f64) {
        let episode = self.episodes.len().saturating_sub(1);
        self.episode_metrics.push((episode, name.to_string(), value));
    }

    pub fn metric_series(&self, name: &str) -> Vec<f64> {
        self.episode_metrics
            .iter()
            .filter(|(_, n, _)| n == name)
            .map(|(_, _, v)| *v)
            .collect()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.ret).collect()
    }

    pub fn total_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn moving_returns(&self, window: usize) -> Result<Vec<f64>> {
        moving_mean(&self.returns(), window)
    }

    /// Last value of the moving-mean return curve.
    pub fn final_moving_mean(&self, window: usize) -> Result<f64> {
        Ok(*self.moving_returns(window)?.last().expect("nonempty"))
    }

    /// Tidy rows: per episode `return`, `moving_mean` and `steps`; per step
    /// `reward` and, when a learning step ran, `loss`; per update
    /// `episode_loss`; then any extra episode metrics.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if header {
            w.write_record(CSV_HEADER)?;
        }
        let seed = self.seed.to_string();
        let row = |w: &mut csv::Writer<W>, episode: usize, metric: &str, value: f64| {
            w.write_record([
                self.run_id.as_str(),
                seed.as_str(),
                self.model.as_str(),
                &episode.to_string(),
                metric,
                &value.to_string(),
            ])
        };
        let smooth = if self.episodes.is_empty() {
            Vec::new()
        } else {
            self.moving_returns(MOVING_WINDOW)?
        };
        for (e, m) in self.episodes.iter().zip(&smooth) {
            row(&mut w, e.episode, "return", e.ret)?;
            row(&mut w, e.episode, "moving_mean", *m)?;
            row(&mut w, e.episode, "steps", e.steps as f64)?;
        }
        for s in &self.steps {
            row(&mut w, s.episode, "reward", s.reward)?;
            if let Some(l) = s.loss {
                row(&mut w, s.episode, "loss", l)?;
            }
        }
        for &(e, l) in &self.episode_losses {
            row(&mut w, e, "episode_loss", l)?;
        }
        for (e, name, v) in &self.episode_metrics {
            row(&mut w, *e, name, *v)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes several runs into one CSV with a single header.
pub fn write_runs_csv<'a, W: Write>(mut out: W, runs: impl IntoIterator<Item = &'a RunStatistics>) -> Result<()> {
    let mut first = true;
    for r in runs {
        r.write_csv(&mut out, first)?;
        first = false;
    }
    if first {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(CSV_HEADER)?;
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn moving_mean_examples() {
        assert_eq!(moving_mean(&[4.0; 7], 3).unwrap(), vec![4.0; 7]);
        assert_eq!(moving_mean(&[0.0, 10.0], 2).unwrap(), vec![0.0, 5.0]);
        assert!(matches!(moving_mean(&[], 3), Err(MetricsError::EmptySeries)));
        assert!(matches!(moving_mean(&[1.0], 0), Err(MetricsError::ZeroWindow)));
    }

    #[test]
    fn dcg_and_ndcg_examples() {
        assert_eq!(dcg(&[5.0]).unwrap(), 5.0);
        assert!(close(dcg(&[3.0, 2.0]).unwrap(), 3.0 + 2.0 / 3f64.log2(), 1e-12));
        assert!(close(dcg(&[3.0, 2.0]).unwrap(), 4.2619, 1e-4));
        assert_eq!(dcg(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(dcg(&[]), Err(MetricsError::EmptyList)));
        for n in 1..12 {
            assert!(close(ndcg(&vec![5.0; n], 5.0).unwrap(), 1.0, 1e-15));
        }
        assert!(close(ndcg(&[3.0, 2.0], 5.0).unwrap(), 0.5226, 1e-4));
        assert_eq!(ndcg(&[0.0; 4], 5.0).unwrap(), 0.0);
        assert!(ndcg(&[6.0], 5.0).is_err());
    }

    #[test]
    fn ci_examples() {
        assert_eq!(ci95(&[2.5; 4]).unwrap(), (2.5, 0.0));
        let (m, h) = ci95(&[0.0, 10.0]).unwrap();
        assert_eq!(m, 5.0);
        assert!(close(h, 1.96 * 50f64.sqrt() / 2f64.sqrt(), 1e-12));
        assert!(close(h, 9.80, 1e-2));
        assert!(matches!(ci95(&[1.0]), Err(MetricsError::TooFewSamples(1))));
        // fixed sd: repeating the pair keeps sd near 5√2 while n grows
        let four = ci95(&[0.0, 10.0, 0.0, 10.0]).unwrap().1;
        assert!(four < h);
    }

    #[test]
    fn run_statistics_sums_episodes() {
        let mut s = RunStatistics::new("r0", 7, "random", "ml1m");
        for e in 0..3 {
            for t in 0..4 {
                s.record_step((e * 4 + t) as f64, if t == 3 { Some(0.5) } else { None });
            }
            s.finish_episode(None);
        }
        assert_eq!(s.returns(), vec![6.0, 22.0, 38.0]);
        assert!(s.episodes.iter().all(|e| e.steps == 4));
        let mut buf = Vec::new();
        s.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "run_id,seed,model,episode,metric,value");
        assert_eq!(lines[1], "r0,7,random,0,return,6");
        assert_eq!(lines.iter().filter(|l| l.contains(",reward,")).count(), 12);
        assert_eq!(lines.iter().filter(|l| l.contains(",loss,")).count(), 3);
    }

    proptest! {
        #[test]
        fn moving_mean_translation_equivariant(
            xs in prop::collection::vec(-100.0f64..100.0, 1..200),
            c in -50.0f64..50.0,
            window in 1usize..120,
        ) {
            let base = moving_mean(&xs, window).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let moved = moving_mean(&shifted, window).unwrap();
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a + c - b).abs() < 1e-9);
            }
        }

        #[test]
        fn dcg_prefix_bounded(xs in prop::collection::vec(0.0f64..5.0, 1..30), cut in 1usize..30) {
            let cut = cut.min(xs.len());
            prop_assert!(dcg(&xs[..cut]).unwrap() <= dcg(&xs).unwrap() + 1e-12);
        }

        #[test]
        fn sorting_never_lowers_ndcg(xs in prop::collection::vec(0.0f64..=5.0, 1..20)) {
            let mut sorted = xs.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            prop_assert!(ndcg(&sorted, 5.0).unwrap() + 1e-12 >= ndcg(&xs, 5.0).unwrap());
        }
    }
}
