//! Brute-force pair counting oracle for the (adjusted) Rand index.

/// `(RI, ARI)` from the four pair counts, using the pair-counting form of the
/// adjusted index `2(ad − bc) / ((a+b)(b+d) + (a+c)(c+d))`.
pub fn brute_force(x: &[usize], y: &[usize]) -> (f64, f64) {
    let n = x.len();
    let (mut a, mut b, mut c, mut d) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let total = a + b + c + d;
    let ri = if total == 0.0 { 1.0 } else { (a + d) / total };
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    let ari = if denom == 0.0 {
        if b == 0.0 && c == 0.0 { 1.0 } else { 0.0 }
    } else {
        2.0 * (a * d - b * c) / denom
    };
    (ri, ari)
}

/// Every labelling of `n` items with labels in `0..n`, which covers every set
/// partition under many relabellings.
pub fn all_labellings(n: usize) -> Vec<Vec<usize>> {
    let total = n.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let v = code % n;
                    code /= n;
                    v
                })
                .collect()
        })
        .collect()
}
