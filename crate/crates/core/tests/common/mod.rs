//! Shared fixtures for the model integration tests and the acceptance suite.
#![allow(dead_code)]

use std::rc::Rc;

use gtnvf_core::graph::Graph;
use gtnvf_core::model::{sample_blocks, Adjacency, GraphInputs, GtnConfig, GtnModel, Model, Sampling, Tape, TrainConfig};
use ndarray::{s, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const K_NUM: usize = 3;

pub struct Fixture {
    pub model: GtnModel,
    pub inputs: GraphInputs,
    pub targets: Vec<f64>,
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for s in 0..n as u32 {
        for d in 0..n as u32 {
            if s != d && rng.random_bool(p) {
                edges.push((s, d));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// A GTN with randomized weights on a random graph of `n` nodes.
pub fn fixture(seed: u64, n: usize, layers: usize, heads: usize, channels: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = random_graph(&mut rng, n, 0.4);
    let n_symbols = 3;
    let features = Array2::from_shape_fn((n, K_NUM), |_| rng.random_range(-1.5..1.5));
    let symbols = (0..n).map(|i| (i % n_symbols) as u32).collect();
    let targets = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let config = GtnConfig {
        layers,
        heads,
        channels,
        k_cat: 2,
        fanout: n,
        train: TrainConfig {
            seed,
            ..TrainConfig::default()
        },
    };
    let mut model = GtnModel::new(config, n_symbols, K_NUM, 1.3).unwrap();
    // larger weights than the default init keep attention logits away from uniform
    for i in 0..model.params.len() {
        model.params.tensor_mut(i).mapv_inplace(|w| w * 2.0);
    }
    Fixture {
        model,
        inputs: GraphInputs {
            graph,
            features,
            symbols,
        },
        targets,
    }
}

pub fn loss(model: &GtnModel, inputs: &GraphInputs, nodes: &[u32], targets: &[f64]) -> (Tape, gtnvf_core::model::Var) {
    let mut tape = Tape::new();
    let y = model.forward(&mut tape, inputs, nodes, Sampling::Full).unwrap();
    let t: Vec<f64> = nodes.iter().map(|&n| targets[n as usize]).collect();
    let l = tape.rmspe(y, Rc::new(t), 0.0).unwrap();
    (tape, l)
}

/// Largest relative deviation between reverse-mode gradients and central
/// differences over every parameter entry.
pub fn gradient_check(fx: &mut Fixture, nodes: &[u32]) -> f64 {
    let (tape, l) = loss(&fx.model, &fx.inputs, nodes, &fx.targets);
    let grads = tape.backward(l, &fx.model.params).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for p in 0..fx.model.params.len() {
        let dim = fx.model.params.tensor(p).dim();
        for r in 0..dim.0 {
            for c in 0..dim.1 {
                let orig = fx.model.params.tensor(p)[[r, c]];
                fx.model.params.tensor_mut(p)[[r, c]] = orig + h;
                let (t1, l1) = loss(&fx.model, &fx.inputs, nodes, &fx.targets);
                fx.model.params.tensor_mut(p)[[r, c]] = orig - h;
                let (t2, l2) = loss(&fx.model, &fx.inputs, nodes, &fx.targets);
                fx.model.params.tensor_mut(p)[[r, c]] = orig;
                let fd = (t1.value(l1)[[0, 0]] - t2.value(l2)[[0, 0]]) / (2.0 * h);
                let g = grads[p][[r, c]];
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-5);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

fn softplus(x: f64) -> f64 {
    gtnvf_core::model::tape::softplus(x)
}

/// Forward pass with full-graph dense matrices and a `-inf` mask.
pub fn dense_forward(model: &GtnModel, inputs: &GraphInputs) -> Vec<f64> {
    let n = inputs.graph.n_nodes();
    let p = &model.params;
    let mut mask = Array2::from_elem((n, n), false);
    for d in 0..n {
        for &s in inputs.graph.neighbors(d) {
            mask[[d, s as usize]] = true;
        }
    }
    let emb = p.tensor(p.index_of("embedding").unwrap());
    let k_cat = emb.ncols();
    let mut h = Array2::zeros((n, K_NUM + k_cat));
    for i in 0..n {
        h.slice_mut(s![i, ..K_NUM]).assign(&inputs.features.row(i));
        h.slice_mut(s![i, K_NUM..]).assign(&emb.row(model.embedding_row(inputs.symbols[i])));
    }
    let heads = model.config.heads;
    for l in 0..model.config.layers {
        let w = |name: &str| p.tensor(p.index_of(&format!("layer{l}.{name}")).unwrap());
        let scale = 1.0 / (h.ncols() as f64).sqrt();
        let own = h.dot(w("w1"));
        let v = h.dot(w("w2"));
        let q = h.dot(w("w3"));
        let k = h.dot(w("w4"));
        let dh = q.ncols() / heads;
        let mut agg = Array2::<f64>::zeros(own.dim());
        for c in 0..heads {
            let cols = s![.., c * dh..(c + 1) * dh];
            let logits = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            for i in 0..n {
                let masked: Vec<f64> = (0..n)
                    .map(|j| if mask[[i, j]] { logits[[i, j]] } else { f64::NEG_INFINITY })
                    .collect();
                let max = masked.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max == f64::NEG_INFINITY {
                    continue;
                }
                let e: Vec<f64> = masked.iter().map(|&x| (x - max).exp()).collect();
                let z: f64 = e.iter().sum();
                for j in 0..n {
                    let a = e[j] / z;
                    for col in c * dh..(c + 1) * dh {
                        agg[[i, col]] += a * v[[j, col]];
                    }
                }
            }
        }
        h = (own + agg).mapv(|x| x.max(0.0));
    }
    let y = h.dot(p.tensor(p.index_of("w0").unwrap()));
    y.column(0).iter().map(|&x| model.target_scale * softplus(x)).collect()
}

/// Predictions from sampled blocks with a fanout covering every neighbour.
pub fn sampled_forward(model: &GtnModel, inputs: &GraphInputs) -> Vec<f64> {
    let n = inputs.graph.n_nodes();
    let nodes: Vec<u32> = (0..n as u32).collect();
    let max_deg = (0..n).map(|v| inputs.graph.in_degree(v)).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let batch = sample_blocks(&inputs.graph, &nodes, model.config.layers, Some(max_deg.max(1)), &mut rng);
    let mut tape = Tape::new();
    let y = model.forward_batch(&mut tape, inputs, &batch).unwrap();
    tape.value(y).column(0).to_vec()
}

pub struct AttentionProbe {
    pub max_sum_error: f64,
    pub max_shift_error: f64,
    pub max_permutation_error: f64,
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-2.0..2.0))
}

/// Checks softmax normalization, invariance to a per-destination logit shift
/// and to reordering each destination's sources, on raw attention ops.
pub fn attention_probe(seed: u64) -> AttentionProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_dst, n_src, heads, dh) = (7, 11, 3, 4);
    let mut offsets = vec![0];
    let mut sources = Vec::new();
    for _ in 0..n_dst {
        let deg = rng.random_range(0..=n_src);
        let mut pool: Vec<usize> = (0..n_src).collect();
        for _ in 0..deg {
            let i = rng.random_range(0..pool.len());
            sources.push(pool.swap_remove(i));
        }
        offsets.push(sources.len());
    }
    let adj = Rc::new(Adjacency { offsets, sources });
    let q = random_matrix(&mut rng, n_dst, heads * dh);
    let k = random_matrix(&mut rng, n_src, heads * dh);
    let v = random_matrix(&mut rng, n_src, heads * dh);
    let scale = 0.7;

    let run = |q: &Array2<f64>, k: &Array2<f64>, adj: Rc<Adjacency>| {
        let mut tape = Tape::new();
        let (qv, kv, vv) = (tape.leaf(q.clone()), tape.leaf(k.clone()), tape.leaf(v.clone()));
        let out = tape.attention(qv, kv, vv, heads, scale, adj);
        (tape.value(out).clone(), tape.attention_weights(out).unwrap())
    };
    let (base, weights) = run(&q, &k, adj.clone());

    let mut max_sum_error = 0.0f64;
    for i in 0..adj.n_dst() {
        if adj.row(i).is_empty() {
            continue;
        }
        for c in 0..heads {
            let sum: f64 = (adj.offsets[i]..adj.offsets[i + 1]).map(|e| weights[e][c]).sum();
            max_sum_error = max_sum_error.max((sum - 1.0).abs());
        }
    }

    // an extra key column of ones and query column shift/scale adds `shift` to every logit of a row
    let widen = |m: &Array2<f64>, fill: &dyn Fn(usize, usize) -> f64| {
        Array2::from_shape_fn((m.nrows(), heads * (dh + 1)), |(r, col)| {
            let (c, j) = (col / (dh + 1), col % (dh + 1));
            if j < dh {
                m[[r, c * dh + j]]
            } else {
                fill(r, c)
            }
        })
    };
    let shifts = random_matrix(&mut rng, n_dst, heads) * 50.0;
    let q2 = widen(&q, &|r, c| shifts[[r, c]] / scale);
    let k2 = widen(&k, &|_, _| 1.0);
    let mut tape = Tape::new();
    let (qv, kv, vv) = (tape.leaf(q2), tape.leaf(k2), tape.leaf(v.clone()));
    let out = tape.attention(qv, kv, vv, heads, scale, adj.clone());
    let max_shift_error = max_abs_diff(tape.value(out), &base);

    let mut permuted = Adjacency {
        offsets: adj.offsets.clone(),
        sources: adj.sources.clone(),
    };
    for i in 0..adj.n_dst() {
        let (a, b) = (adj.offsets[i], adj.offsets[i + 1]);
        permuted.sources[a..b].reverse();
        if b - a > 2 {
            permuted.sources[a..b].rotate_left(1);
        }
    }
    let (shuffled, _) = run(&q, &k, Rc::new(permuted));
    AttentionProbe {
        max_sum_error,
        max_shift_error,
        max_permutation_error: max_abs_diff(&shuffled, &base),
    }
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest prediction change when node ids are relabelled, which reorders
/// every neighbour list.
pub fn relabel_error(fx: &Fixture, seed: u64) -> f64 {
    let n = fx.inputs.graph.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut edges = Vec::new();
    for d in 0..n {
        for &s in fx.inputs.graph.neighbors(d) {
            edges.push((perm[s as usize], perm[d]));
        }
    }
    let mut features = Array2::zeros(fx.inputs.features.dim());
    let mut symbols = vec![0; n];
    for i in 0..n {
        features.row_mut(perm[i] as usize).assign(&fx.inputs.features.row(i));
        symbols[perm[i] as usize] = fx.inputs.symbols[i];
    }
    let moved = GraphInputs {
        graph: Graph::from_edges(n, edges),
        features,
        symbols,
    };
    let nodes: Vec<u32> = (0..n as u32).collect();
    let a = gtnvf_core::model::predict(&fx.model, &fx.inputs, &nodes).unwrap();
    let b = gtnvf_core::model::predict(&fx.model, &moved, &perm).unwrap();
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub const HAR_TRUTH: gtnvf_core::baselines::har::HarParams = gtnvf_core::baselines::har::HarParams {
    beta0: 0.0008,
    beta_b: 0.35,
    beta_d: 0.3,
    beta_w: 0.2,
};

/// Simulates a HAR panel from [`HAR_TRUTH`] and fits it on the first
/// `n_rows` rows with complete history.
pub fn har_recovery(seed: u64, n_rows: usize) -> gtnvf_core::baselines::har::HarParams {
    use gtnvf_core::baselines::har::{har_fit, har_lags, HarObservation, HarRow};
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let (symbols, per_day) = (10u32, 6);
    let days = n_rows / (symbols as usize * per_day) + 7;
    let truth = HAR_TRUTH;
    let mut obs = Vec::new();
    for s in 0..symbols {
        let mut daily_means: Vec<f64> = Vec::new();
        for day in 0..days {
            // a shared day factor on the bucket regressor moves the daily and weekly lags apart
            let day_factor = (0.8 * noise.sample(&mut rng) - 0.32f64).exp();
            let mut sum = 0.0;
            for _ in 0..per_day {
                let prev = daily_means.last().copied().unwrap_or(0.004);
                let backward_rv = prev * day_factor * (0.2 * noise.sample(&mut rng) - 0.02f64).exp();
                let mean = if day >= 5 {
                    let d = daily_means[day - 1];
                    let w = daily_means[day - 5..day].iter().sum::<f64>() / 5.0;
                    truth.beta0 + truth.beta_b * backward_rv + truth.beta_d * d + truth.beta_w * w
                } else {
                    0.004
                };
                let target = (mean * (1.0 + 0.05 * noise.sample(&mut rng))).max(1e-6);
                obs.push(HarObservation {
                    symbol: s,
                    day,
                    backward_rv,
                    target,
                });
                sum += target;
            }
            daily_means.push(sum / per_day as f64);
        }
    }
    let rows: Vec<HarRow> = har_lags(&obs)
        .into_iter()
        .zip(&obs)
        .filter_map(|(l, o)| l.map(|lags| HarRow { lags, y: o.target }))
        .take(n_rows)
        .collect();
    assert_eq!(rows.len(), n_rows);
    har_fit(&rows).unwrap().expect("full rank design")
}

pub fn har_max_relative_error(fit: &gtnvf_core::baselines::har::HarParams) -> f64 {
    let t = HAR_TRUTH;
    [
        (fit.beta0, t.beta0),
        (fit.beta_b, t.beta_b),
        (fit.beta_d, t.beta_d),
        (fit.beta_w, t.beta_w),
    ]
    .iter()
    .map(|(a, b)| ((a - b) / b).abs())
    .fold(0.0, f64::max)
}

/// Textbook definitions of every aggregator, one element at a time.
pub fn oracle_aggregate(a: &[f64], offsets: &[u32], len: u32, agg: gtnvf_core::features::Aggregator) -> f64 {
    use gtnvf_core::features::Aggregator::*;
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len() as f64;
    let mean = |v: &[f64]| {
        let mut s = 0.0;
        for x in v {
            s += x;
        }
        s / v.len() as f64
    };
    let m = mean(a);
    let quantile = |v: &[f64], q: f64| {
        let mut s = v.to_vec();
        s.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let pos = q * (s.len() - 1) as f64;
        let (lo, frac) = (pos.floor() as usize, pos.fract());
        if lo + 1 < s.len() {
            s[lo] * (1.0 - frac) + s[lo + 1] * frac
        } else {
            s[lo]
        }
    };
    let share = |f: &dyn Fn(f64) -> bool| a.iter().filter(|&&x| f(x)).count() as f64 / n;
    match agg {
        Mean => m,
        Std => {
            let mut ss = 0.0;
            for x in a {
                ss += (x - m).powi(2);
            }
            (ss / n).sqrt()
        }
        Sum => a.iter().sum(),
        Max => a.iter().copied().fold(f64::MIN, f64::max),
        Count => n,
        Gini => {
            if m == 0.0 {
                return 0.0;
            }
            let mut total = 0.0;
            for x in a {
                for y in a {
                    total += (x - y).abs();
                }
            }
            total / (2.0 * n * n * m)
        }
        PctDifference => {
            let mut changes = 0;
            for i in 1..a.len() {
                if a[i] != a[i - 1] {
                    changes += 1;
                }
            }
            changes as f64 / n
        }
        RealizedVolatility => (a.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        PctGreaterMean => share(&|x| x > m),
        PctLessMean => share(&|x| x < m),
        PctGreaterZero => share(&|x| x > 0.0),
        PctLessZero => share(&|x| x < 0.0),
        MedianDeviation => {
            let dev: Vec<f64> = a.iter().map(|x| (x - m).abs()).collect();
            quantile(&dev, 0.5)
        }
        Energy => a.iter().map(|x| x * x).sum::<f64>() / n,
        Iqr => quantile(a, 0.75) - quantile(a, 0.25),
        MeanFirst100 | MeanLast100 => {
            let keep: Vec<f64> = a
                .iter()
                .zip(offsets)
                .filter(|(_, &o)| if agg == MeanFirst100 { o < 100 } else { o + 100 >= len })
                .map(|(&x, _)| x)
                .collect();
            if keep.is_empty() {
                0.0
            } else {
                mean(&keep)
            }
        }
    }
}

/// Largest deviation from the oracle over `n_series` random windows, each
/// checked as a plain series and with sparse second offsets.
pub fn aggregator_oracle_error(seed: u64, n_series: usize) -> f64 {
    use gtnvf_core::features::{aggregate, Aggregator, Windowed};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_series {
        let len = rng.random_range(0..250usize);
        // integer-valued series exercise ties, zeros and repeated values
        let ties = rng.random_bool(0.3);
        let signed = rng.random_bool(0.5);
        let lo = if signed { -50.0 } else { 0.0 };
        let values: Vec<f64> = (0..len)
            .map(|_| if ties { rng.random_range(if signed { -3 } else { 0 }..4) as f64 } else { rng.random_range(lo..50.0) })
            .collect();
        let window = 600u32;
        let mut offsets: Vec<u32> = (0..len).map(|_| rng.random_range(0..window)).collect();
        offsets.sort_unstable();
        let plain: Vec<u32> = (0..len as u32).collect();
        for agg in Aggregator::ALL {
            // Gini is defined for non-negative data only
            if signed && agg == Aggregator::Gini {
                continue;
            }
            let got = aggregate(&values, agg);
            let want = oracle_aggregate(&values, &plain, len as u32, agg);
            worst = worst.max((got - want).abs());
            let got = Windowed::new(&values, &offsets, window).aggregate(agg);
            let want = oracle_aggregate(&values, &offsets, window, agg);
            worst = worst.max((got - want).abs());
        }
    }
    worst
}
