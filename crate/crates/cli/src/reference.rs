//! Published reference values, printed next to local measurements for
//! orientation. They were obtained on far larger corpora and different
//! hardware and are not expected to be reproduced by local runs.

pub const NOTE: &str = "published reference, not reproducible locally";

/// (corpus, K, length-weighted TPC, BPE TPC)
pub const TPC_GRID: &[(&str, usize, f64, f64)] = &[
    ("News", 10_000, 1.523, 1.472),
    ("News", 20_000, 1.239, 1.307),
    ("News", 30_000, 1.129, 1.266),
    ("News", 40_000, 1.069, 1.240),
    ("News", 50_000, 1.029, 1.229),
    ("Medical", 10_000, 1.842, 1.808),
    ("Medical", 20_000, 1.546, 1.577),
    ("Medical", 30_000, 1.422, 1.500),
    ("Medical", 40_000, 1.347, 1.455),
    ("Medical", 50_000, 1.294, 1.424),
    ("Chats", 10_000, 1.480, 1.461),
    ("Chats", 20_000, 1.229, 1.299),
    ("Chats", 30_000, 1.127, 1.255),
    ("Chats", 40_000, 1.068, 1.236),
    ("Chats", 50_000, 1.026, 1.226),
    ("Papers", 10_000, 3.022, 2.874),
    ("Papers", 20_000, 2.701, 2.622),
    ("Papers", 30_000, 2.583, 2.533),
    ("Papers", 40_000, 2.480, 2.482),
    ("Papers", 50_000, 2.412, 2.455),
    ("Poems", 10_000, 1.772, 1.745),
    ("Poems", 20_000, 1.501, 1.599),
    ("Poems", 30_000, 1.409, 1.554),
    ("Poems", 40_000, 1.350, 1.433),
    ("Poems", 50_000, 1.308, 1.416),
    ("Training", 10_000, 1.562, 1.558),
    ("Training", 20_000, 1.299, 1.379),
    ("Training", 30_000, 1.193, 1.324),
    ("Training", 40_000, 1.129, 1.297),
    ("Training", 50_000, 1.084, 1.279),
];

/// (K, BPE tokens used, length-weighted tokens used)
pub const UTILIZATION: &[(usize, usize, usize)] = &[
    (1_000, 904, 999),
    (2_000, 1_855, 1_999),
    (3_000, 2_766, 2_999),
    (4_000, 3_648, 3_994),
    (5_000, 4_491, 4_991),
    (6_000, 5_296, 5_987),
    (7_000, 6_094, 6_986),
    (8_000, 6_821, 7_984),
    (9_000, 7_516, 8_977),
    (10_000, 8_205, 9_965),
];

/// (cores, MB/s, speedup, efficiency %)
pub const SCALING: &[(usize, f64, f64, f64)] = &[
    (1, 60.0, 1.0, 100.0),
    (2, 118.0, 1.97, 98.0),
    (4, 233.0, 3.88, 97.0),
    (8, 463.0, 7.72, 96.0),
    (16, 918.0, 15.3, 95.0),
    (32, 1_810.0, 30.2, 94.0),
    (64, 3_540.0, 58.9, 92.0),
    (128, 6_930.0, 115.5, 90.0),
    (256, 13_400.0, 223.3, 87.0),
];

/// (tokenizer, alpha, alpha std, R², R² std)
pub const ZIPF: &[(&str, f64, f64, f64, f64)] = &[("length-max", 0.95, 0.02, 0.941, 0.004), ("bpe", 1.08, 0.03, 0.909, 0.006)];

/// Top-50 relative frequency variance: (tokenizer, value)
pub const HEAD_VARIANCE: &[(&str, f64)] = &[("length-max", 1.0e-6), ("bpe", 8.7e-5)];

pub fn tpc_table() -> String {
    let mut s = format!("# {NOTE}\ncorpus,K,length-max,bpe\n");
    for (c, k, lm, bpe) in TPC_GRID {
        s.push_str(&format!("{c},{k},{lm:.3},{bpe:.3}\n"));
    }
    s
}

pub fn scaling_table() -> String {
    let mut s = format!("# {NOTE}\ncores,MB/s,speedup,efficiency%\n");
    for (c, t, sp, e) in SCALING {
        s.push_str(&format!("{c},{t},{sp},{e}\n"));
    }
    s
}

pub fn utilization_table() -> String {
    let mut s = format!("# {NOTE}\nK,bpe_used,length_max_used\n");
    for (k, b, l) in UTILIZATION {
        s.push_str(&format!("{k},{b},{l}\n"));
    }
    s
}

pub fn zipf_table() -> String {
    let mut s = format!("# {NOTE}\ntokenizer,alpha,R2,head_variance\n");
    for (t, a, sa, r, sr) in ZIPF {
        let hv = HEAD_VARIANCE.iter().find(|h| h.0 == *t).map_or(f64::NAN, |h| h.1);
        s.push_str(&format!("{t},{a}±{sa},{r}±{sr},{hv:e}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_complete() {
        assert_eq!(TPC_GRID.len(), 30);
        let news50 = TPC_GRID.iter().find(|r| r.0 == "News" && r.1 == 50_000).unwrap();
        assert_eq!((news50.2, news50.3), (1.029, 1.229));
    }

    #[test]
    fn efficiency_is_speedup_over_cores() {
        for (c, _, sp, e) in SCALING {
            assert!((sp / *c as f64 * 100.0 - e).abs() < 1.0, "{c}");
        }
    }
}
