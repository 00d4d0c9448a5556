use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqmean::estimators::{dyadic_mean, known_bound_mean, OracleFactory};
use sqmean::harness::verify::random_nonneg_instance;
use sqmean::{
    exact_moments, BudgetLedger, FiniteDistribution, Policy, Query, QueryLog, Result,
    StatisticalOracle, VstatOracle,
};

type Sink = Rc<RefCell<Vec<Vec<f64>>>>;

struct Recorded {
    inner: VstatOracle,
    sink: Sink,
}

impl StatisticalOracle for Recorded {
    fn answer(&mut self, q: &Query) -> Result<f64> {
        self.sink.borrow_mut().push(q.values().to_vec());
        self.inner.answer(q)
    }
    fn parameter(&self) -> u64 {
        self.inner.parameter()
    }
    fn tolerance(&self, p: f64) -> f64 {
        self.inner.tolerance(p)
    }
    fn distribution(&self) -> &FiniteDistribution {
        self.inner.distribution()
    }
    fn ledger(&self) -> BudgetLedger {
        self.inner.ledger()
    }
}

struct Recording {
    dist: Arc<FiniteDistribution>,
    policy: Policy,
    seed: u64,
    sink: Sink,
}

impl OracleFactory for Recording {
    type Oracle = Recorded;

    fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }

    fn build(&mut self, n: u64) -> Result<Recorded> {
        self.seed += 1;
        Ok(Recorded {
            inner: VstatOracle::new(self.dist.clone(), n, self.policy, self.seed)?,
            sink: self.sink.clone(),
        })
    }
}

#[test]
fn dyadic_queries_do_not_depend_on_answers() {
    for case in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let (dist, q) = random_nonneg_instance(&mut rng, 64);
        let q = q.declare(0.0, 1.0).unwrap();
        let dist = Arc::new(dist);
        let mut sequences = Vec::new();
        for (i, policy) in Policy::ALL.into_iter().enumerate() {
            let o = VstatOracle::new(dist.clone(), 1024, policy, i as u64).unwrap();
            let mut log = QueryLog::new(o);
            dyadic_mean(&mut log, &q).unwrap();
            sequences.push(log.queries);
        }
        assert!(sequences.windows(2).all(|w| w[0] == w[1]), "case {case}");
    }
}

#[test]
fn known_bound_queries_do_not_depend_on_answers() {
    for case in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + case);
        let (dist, q) = random_nonneg_instance(&mut rng, 64);
        let dist = Arc::new(dist);
        let rms = exact_moments(&dist, &q).unwrap().rms();
        let b = if rms > 0.0 { rms } else { 1.0 };
        let mut sequences = Vec::new();
        for policy in Policy::ALL {
            let sink = Sink::default();
            let mut f = Recording {
                dist: dist.clone(),
                policy,
                seed: case,
                sink: sink.clone(),
            };
            let r = known_bound_mean(&mut f, &q, b, b / 16.0).unwrap();
            assert!(r.realized_error <= b / 16.0);
            assert_eq!(r.queries_used as usize, sink.borrow().len());
            sequences.push(sink.take());
        }
        assert!(sequences.windows(2).all(|w| w[0] == w[1]), "case {case}");
    }
}
