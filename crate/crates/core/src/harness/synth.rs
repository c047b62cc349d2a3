//! Synthetic limit order book generator.
//!
//! Log volatility is piecewise constant over blocks of `block_seconds`:
//!
//! ```text
//! log_vol[s, b] = mu_s + loading * f[g(s), b] + x[s, b] + spillover * mean_{p ~ s} x[p, b - 1]
//! f[g, b] = sector_ar * f[g, b - 1] + innovation,   stationary sd = sector_sd
//! x[s, b] = idio_ar * x[s, b - 1] + innovation,     stationary sd = idio_sd * c_s
//! ```
//!
//! with `c_s` falling with the stock's liquidity.
//!
//! where `p ~ s` ranges over supply-chain partners. Both processes run across
//! day boundaries. The mid price is a per-second random walk with that
//! volatility and shocks partly shared within a sector. Quote updates and
//! trades arrive as Poisson counts whose rates scale with a per-stock
//! liquidity drawn log-uniformly; trade prints carry noise that shrinks with
//! liquidity.
//!
//! Every stock-day draws from its own stream seeded by `(seed, stock, day)`
//! and sector shocks from `(seed, sector, day)`, so any stock-day can be
//! produced independently of the others.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SectorMembership;
use crate::lob::{QuoteEvent, SymbolId, TradeEvent, Universe, HOURLY_ANCHORS, SESSION_SECONDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolatilitySpec {
    /// Mean log of the per-second return volatility.
    pub base_log_vol: f64,
    /// Cross-sectional sd of the per-stock mean log volatility.
    pub stock_spread: f64,
    pub block_seconds: u32,
    pub sector_loading: f64,
    pub sector_ar: f64,
    pub sector_sd: f64,
    pub idio_ar: f64,
    pub idio_sd: f64,
    pub spillover: f64,
    /// Correlation of per-second return shocks within a sector.
    pub return_correlation: f64,
}

impl Default for VolatilitySpec {
    fn default() -> Self {
        Self {
            base_log_vol: -8.9,
            stock_spread: 0.3,
            block_seconds: 300,
            sector_loading: 1.0,
            sector_ar: 0.98,
            sector_sd: 0.5,
            idio_ar: 0.5,
            idio_sd: 0.5,
            spillover: 0.5,
            return_correlation: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiquiditySpec {
    pub min: f64,
    pub max: f64,
    /// Trades per second at liquidity 1.
    pub trade_rate: f64,
    /// Quote updates per second at liquidity 1.
    pub quote_rate: f64,
    /// Half spread in basis points at liquidity 1.
    pub half_spread_bps: f64,
    /// Trade print noise in basis points at liquidity 1.
    pub print_noise_bps: f64,
    /// Idiosyncratic log-vol sd scales as `(liquidity / sqrt(min * max))^-idio_exponent`.
    pub idio_exponent: f64,
}

impl Default for LiquiditySpec {
    fn default() -> Self {
        Self {
            min: 0.05,
            max: 1.0,
            trade_rate: 2.0,
            quote_rate: 4.0,
            half_spread_bps: 2.0,
            print_noise_bps: 0.5,
            idio_exponent: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_stocks: usize,
    pub n_sectors: usize,
    pub n_days: usize,
    /// First trading day; weekends are skipped.
    pub start_date: NaiveDate,
    pub supply_pairs: usize,
    pub volatility: VolatilitySpec,
    pub liquidity: LiquiditySpec,
    /// Events are only produced within this many seconds of each anchor;
    /// `None` covers the whole session.
    pub coverage_seconds: Option<u32>,
    pub anchors: Vec<u32>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_stocks: 30,
            n_sectors: 3,
            n_days: 60,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            supply_pairs: 15,
            volatility: VolatilitySpec::default(),
            liquidity: LiquiditySpec::default(),
            coverage_seconds: Some(600),
            anchors: HOURLY_ANCHORS.to_vec(),
            seed: 0,
        }
    }
}

/// splitmix64 folded over the parts.
fn mix(parts: &[u64]) -> u64 {
    let mut h = 0x243f_6a88_85a3_08d3u64;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

const STREAM_LATENT: u64 = 1;
const STREAM_STOCK: u64 = 2;
const STREAM_SECTOR: u64 = 3;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_stocks == 0 || self.n_days == 0 || self.n_sectors == 0 {
            return Err(Error::Config("synthetic spec needs stocks, days and sectors".into()));
        }
        if self.n_sectors > self.n_stocks {
            return Err(Error::Config("more sectors than stocks".into()));
        }
        let v = &self.volatility;
        if v.block_seconds == 0 || SESSION_SECONDS % v.block_seconds != 0 {
            return Err(Error::Config("block_seconds must divide the session".into()));
        }
        if !(0.0..1.0).contains(&v.sector_ar.abs()) || !(0.0..1.0).contains(&v.idio_ar.abs()) {
            return Err(Error::Config("autoregressive coefficients must lie in (-1, 1)".into()));
        }
        if !(0.0..=1.0).contains(&v.return_correlation) {
            return Err(Error::Config("return_correlation must lie in [0, 1]".into()));
        }
        let l = &self.liquidity;
        if !(l.min > 0.0 && l.max >= l.min && l.trade_rate > 0.0 && l.quote_rate > 0.0 && l.idio_exponent.is_finite()) {
            return Err(Error::Config("liquidity bounds and rates must be positive".into()));
        }
        let max_pairs = self.n_stocks * (self.n_stocks - 1) / 2;
        if self.supply_pairs > max_pairs {
            return Err(Error::Config(format!(
                "{} supply pairs requested, at most {max_pairs} exist",
                self.supply_pairs
            )));
        }
        Ok(())
    }

    pub fn stocks_per_sector(&self) -> usize {
        self.n_stocks.div_ceil(self.n_sectors)
    }

    pub fn sector_of(&self, stock: usize) -> usize {
        stock / self.stocks_per_sector()
    }

    pub fn universe(&self) -> Universe {
        Universe::new((0..self.n_stocks).map(|i| format!("STK{i:03}")).collect()).expect("unique symbols")
    }

    pub fn trading_days(&self) -> Vec<NaiveDate> {
        let mut out = Vec::with_capacity(self.n_days);
        let mut d = self.start_date;
        while out.len() < self.n_days {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                out.push(d);
            }
            d = d.succ_opt().expect("date in range");
        }
        out
    }

    /// Four-level taxonomy; each level halves the groups of the one above.
    pub fn membership(&self) -> SectorMembership {
        let size = self.stocks_per_sector();
        let universe = self.universe();
        let mut m = SectorMembership::default();
        for (i, sym) in universe.symbols().iter().enumerate() {
            let g = self.sector_of(i);
            let p = i % size;
            let level = |parts: usize| p / size.div_ceil(parts);
            m.labels.insert(
                sym.clone(),
                [
                    format!("{}", 10 * (g + 1)),
                    format!("{}{:02}", 10 * (g + 1), level(2)),
                    format!("{}{:02}{:02}", 10 * (g + 1), level(2), level(4)),
                    format!("{}{:02}{:02}{:02}", 10 * (g + 1), level(2), level(4), level(8)),
                ],
            );
        }
        m
    }

    fn covered(&self, second: u32) -> bool {
        match self.coverage_seconds {
            None => true,
            Some(w) => self
                .anchors
                .iter()
                .any(|&a| second + w >= a && second < a + w),
        }
    }
}

/// Per-stock constants and the block-level volatility path.
#[derive(Debug, Clone)]
pub struct Latent {
    pub liquidity: Vec<f64>,
    pub open_log_price: Vec<Vec<f64>>,
    /// Supplier/customer pairs as stock indices.
    pub pairs: Vec<(usize, usize)>,
    /// `log_vol[day][block * n_stocks + stock]`.
    pub log_vol: Vec<Vec<f64>>,
    blocks_per_day: usize,
}

impl Latent {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_stocks;
        let v = &spec.volatility;
        let l = &spec.liquidity;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[spec.seed, STREAM_LATENT]));
        let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

        let (lo, hi) = (l.min.ln(), l.max.ln());
        let liquidity: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi).exp()).collect();
        let mid_liq = (l.min * l.max).sqrt();
        let idio_scale: Vec<f64> = liquidity.iter().map(|q| (q / mid_liq).powf(-l.idio_exponent)).collect();
        let mu: Vec<f64> = (0..n)
            .map(|_| v.base_log_vol + v.stock_spread * normal(&mut rng))
            .collect();
        let sector_base: Vec<f64> = (0..spec.n_sectors)
            .map(|g| (15.0 * 1.5f64.powi(g as i32)).ln() + 0.1 * normal(&mut rng))
            .collect();

        let mut pairs = Vec::with_capacity(spec.supply_pairs);
        while pairs.len() < spec.supply_pairs {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let p = (a.min(b), a.max(b));
            if a != b && !pairs.contains(&p) {
                pairs.push(p);
            }
        }
        let mut partners = vec![Vec::new(); n];
        for &(a, b) in &pairs {
            partners[a].push(b);
            partners[b].push(a);
        }

        let blocks_per_day = (SESSION_SECONDS / v.block_seconds) as usize;
        let sector_innov = v.sector_sd * (1.0 - v.sector_ar * v.sector_ar).sqrt();
        let idio_innov = v.idio_sd * (1.0 - v.idio_ar * v.idio_ar).sqrt();
        let mut f: Vec<f64> = (0..spec.n_sectors).map(|_| v.sector_sd * normal(&mut rng)).collect();
        let mut x: Vec<f64> = (0..n).map(|_| v.idio_sd * normal(&mut rng)).collect();
        let mut log_vol = Vec::with_capacity(spec.n_days);
        let mut open_log_price = vec![Vec::with_capacity(spec.n_days); n];
        let mut level: Vec<f64> = (0..n)
            .map(|s| sector_base[spec.sector_of(s)] + 0.05 * normal(&mut rng))
            .collect();
        for _ in 0..spec.n_days {
            let mut day = Vec::with_capacity(blocks_per_day * n);
            let mut day_var = vec![0.0; n];
            for _ in 0..blocks_per_day {
                let prev_x = x.clone();
                for g in f.iter_mut() {
                    *g = v.sector_ar * *g + sector_innov * normal(&mut rng);
                }
                for xs in x.iter_mut() {
                    *xs = v.idio_ar * *xs + idio_innov * normal(&mut rng);
                }
                for s in 0..n {
                    let spill = if partners[s].is_empty() {
                        0.0
                    } else {
                        partners[s].iter().map(|&p| idio_scale[p] * prev_x[p]).sum::<f64>() / partners[s].len() as f64
                    };
                    let lv = mu[s] + v.sector_loading * f[spec.sector_of(s)] + idio_scale[s] * x[s] + v.spillover * spill;
                    day_var[s] += (2.0 * lv).exp() * v.block_seconds as f64;
                    day.push(lv);
                }
            }
            for s in 0..n {
                open_log_price[s].push(level[s]);
                // overnight move with the size of the day's diffusion
                level[s] += day_var[s].sqrt() * normal(&mut rng);
            }
            log_vol.push(day);
        }
        Ok(Self {
            liquidity,
            open_log_price,
            pairs,
            log_vol,
            blocks_per_day,
        })
    }

    pub fn vol(&self, day: usize, second: u32, stock: usize, block_seconds: u32) -> f64 {
        let n = self.liquidity.len();
        let b = (second / block_seconds) as usize;
        debug_assert!(b < self.blocks_per_day);
        self.log_vol[day][b * n + stock].exp()
    }

    /// Supply-chain pairs as symbol names.
    pub fn pair_names(&self, universe: &Universe) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .map(|&(a, b)| {
                (
                    universe.symbol(SymbolId(a as u32)).to_string(),
                    universe.symbol(SymbolId(b as u32)).to_string(),
                )
            })
            .collect()
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Raw quote and trade events of one stock on one day.
pub fn stock_day_events(
    spec: &SyntheticSpec,
    latent: &Latent,
    stock: usize,
    day: usize,
) -> (Vec<QuoteEvent>, Vec<TradeEvent>) {
    let v = &spec.volatility;
    let l = &spec.liquidity;
    let sector = spec.sector_of(stock);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[spec.seed, STREAM_STOCK, stock as u64, day as u64]));
    let mut srng = ChaCha8Rng::seed_from_u64(mix(&[spec.seed, STREAM_SECTOR, sector as u64, day as u64]));
    let liq = latent.liquidity[stock];
    let rho = v.return_correlation;
    let own = (1.0 - rho * rho).sqrt();
    let trade_pois = Poisson::new(l.trade_rate * liq).expect("positive rate");
    let quote_pois = Poisson::new(l.quote_rate * liq).expect("positive rate");
    let half_spread = l.half_spread_bps * 1e-4 / liq.sqrt();
    let noise = Normal::new(0.0, l.print_noise_bps * 1e-4 / liq.sqrt()).expect("finite sd");
    let mut log_mid = latent.open_log_price[stock][day];
    let mut quotes = Vec::new();
    let mut trades = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for second in 0..SESSION_SECONDS {
        let zs: f64 = StandardNormal.sample(&mut srng);
        let zi: f64 = StandardNormal.sample(&mut rng);
        if spec.covered(second) {
            let mid = log_mid.exp();
            let nq = quote_pois.sample(&mut rng) as usize;
            times.clear();
            times.extend((0..nq).map(|_| second as f64 + rng.random::<f64>()));
            times.sort_unstable_by(f64::total_cmp);
            for &t in &times {
                quotes.push(QuoteEvent {
                    time: t,
                    bid_price: round4(mid * (1.0 - half_spread)),
                    bid_size: rng.random_range(1..=10),
                    ask_price: round4(mid * (1.0 + half_spread)),
                    ask_size: rng.random_range(1..=10),
                });
            }
            let nt = trade_pois.sample(&mut rng) as usize;
            times.clear();
            times.extend((0..nt).map(|_| second as f64 + rng.random::<f64>()));
            times.sort_unstable_by(f64::total_cmp);
            for &t in &times {
                let eta: f64 = noise.sample(&mut rng);
                trades.push(TradeEvent {
                    time: t,
                    price: round4(mid * eta.exp()),
                    size: 100 * rng.random_range(1..=5),
                });
            }
        }
        let sigma = latent.vol(day, second, stock, v.block_seconds);
        log_mid += sigma * (rho * zs + own * zi);
    }
    (quotes, trades)
}
