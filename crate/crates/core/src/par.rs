//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) these fan out over rayon's
//! global pool; without it, or with [`Exec::Sequential`], they run inline.
//! Results are always collected by index, so both paths produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    fn parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();

    #[cfg(not(feature = "parallel"))]
    return 1;
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    if exec.parallel() {
        #[cfg(feature = "parallel")]
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<S, T, F>(exec: Exec, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Send + Sync,
{
    if exec.parallel() {
        #[cfg(feature = "parallel")]
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// First element (by position) satisfying `pred`.
pub fn find_first<S, F>(items: &[S], pred: F) -> Option<&S>
where
    S: Sync,
    F: Fn(&S) -> bool + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if items.len() > 64 {
        return items.par_iter().find_first(|s| pred(s));
    }
    items.iter().find(|s| pred(s))
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(map_indexed(Exec::Sequential, 1000, f), map_indexed(Exec::Parallel, 1000, f));
    }

    #[test]
    fn find_first_is_positional() {
        let v: Vec<u32> = (0..500).collect();
        assert_eq!(find_first(&v, |&x| x % 97 == 96), Some(&96));
        assert_eq!(find_first(&v, |&x| x > 1000), None);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(v), 1.0);
    }
}
