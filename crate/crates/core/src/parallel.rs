//! Minimal deterministic fan-out: run a fallible job per input on a bounded
//! thread pool and return results in input order. Scheduling never affects
//! which results are produced, only when.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::Result;

pub(crate) fn run_parallel<I, T, F>(inputs: &[I], jobs: usize, work: F) -> Vec<Result<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Result<T> + Sync,
{
    if jobs <= 1 || inputs.len() <= 1 {
        return inputs.iter().map(&work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T>>>> = inputs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(inputs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= inputs.len() {
                    break;
                }
                let result = work(&inputs[i]);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_input_order() {
        let inputs: Vec<u64> = (0..17).collect();
        let out = run_parallel(&inputs, 4, |&x| Ok(x * x));
        let values: Vec<u64> = out.into_iter().map(|r| r.unwrap()).collect();
        let expected: Vec<u64> = inputs.iter().map(|x| x * x).collect();
        assert_eq!(values, expected);
    }

    #[test]
    fn propagates_errors_in_place() {
        let inputs = vec![1u64, 2, 3];
        let out = run_parallel(&inputs, 2, |&x| {
            if x == 2 {
                Err(crate::error::Error::invalid("boom"))
            } else {
                Ok(x)
            }
        });
        assert!(out[0].is_ok());
        assert!(out[1].is_err());
        assert!(out[2].is_ok());
    }
}
