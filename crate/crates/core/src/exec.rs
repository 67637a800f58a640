//! Grid evaluation with an order-preserving map.
//!
//! With the `parallel` feature (default) the work is spread over the rayon
//! pool; without it everything runs on the calling thread. Results always
//! come back in input order, so reports are identical in both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// Sequential order-preserving map.
pub fn map_sequential<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    F: Fn(&I) -> T,
{
    items.iter().map(f).collect()
}

/// Parallel order-preserving map over the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_parallel<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Map using whichever backend the crate was built with.
#[cfg(feature = "parallel")]
pub fn map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_parallel(items, f)
}

#[cfg(not(feature = "parallel"))]
pub fn map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_sequential(items, f)
}

/// Fallible map; the first error in input order wins.
pub fn try_map<I, T, F>(items: &[I], f: F) -> Result<Vec<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Result<T> + Sync + Send,
{
    map(items, f).into_iter().collect()
}

/// Name of the active backend, recorded in run headers.
pub fn backend() -> &'static str {
    if cfg!(feature = "parallel") {
        "rayon"
    } else {
        "sequential"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn preserves_order() {
        let xs: Vec<usize> = (0..1000).collect();
        let ys = map(&xs, |x| x * 2);
        assert_eq!(ys, map_sequential(&xs, |x| x * 2));
    }

    #[test]
    fn first_error_in_order() {
        let xs: Vec<usize> = (0..100).collect();
        let r = try_map(&xs, |&x| {
            if x % 10 == 7 {
                Err(Error::InvalidFrame(format!("{x}")))
            } else {
                Ok(x)
            }
        });
        assert_eq!(r, Err(Error::InvalidFrame("7".into())));
    }
}
