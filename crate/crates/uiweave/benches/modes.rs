//! Sequential vs parallel execution on the two fan-out paths: candidate
//! execution during exploration and task execution during validation. Both
//! run the oracle policy against the simulator, so the numbers isolate the
//! execution strategy from backend latency.

use criterion::{criterion_group, criterion_main, Criterion};

use uiweave::corpus::synth_fixture;
use uiweave::corpus::WidgetKind;
use uiweave::env::{load_simulator, PageSource};
use uiweave::exec::ExecMode;
use uiweave::explorer::{explore_with, ExploreBudget, ExploreConfig};
use uiweave::policy::OraclePolicy;
use uiweave::validator::{validate, DEFAULT_ROUND_CAP};

fn modes() -> Vec<(&'static str, ExecMode)> {
    #[cfg(feature = "parallel")]
    return vec![
        ("sequential", ExecMode::Sequential),
        ("parallel", ExecMode::Parallel),
    ];
    #[cfg(not(feature = "parallel"))]
    vec![("sequential", ExecMode::Sequential)]
}

/// One page carrying every widget template: the widest candidate fan-out the
/// stock corpus can produce.
fn ten_widget_page() -> (String, Vec<uiweave::policy::Task>) {
    let fixture = synth_fixture(1, &WidgetKind::ALL).expect("fixture");
    (fixture.html, fixture.manifest.tasks)
}

fn bench_explore(c: &mut Criterion) {
    let (html, _) = ten_widget_page();
    let source = PageSource::Inline(html);
    let policy = OraclePolicy::new();
    let mut group = c.benchmark_group("explore_ten_widget_page");
    for (name, mode) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| {
                let page = source.clone();
                let factory = move || load_simulator(page.clone());
                let config = ExploreConfig {
                    budget: ExploreBudget::default(),
                    mode,
                    run_dir: None,
                };
                explore_with(&factory, &policy, &config).expect("exploration")
            })
        });
    }
    group.finish();
}

fn bench_validate(c: &mut Criterion) {
    let (html, tasks) = ten_widget_page();
    let source = PageSource::Inline(html);
    let policy = OraclePolicy::new();
    let mut group = c.benchmark_group("validate_ten_widget_page");
    for (name, mode) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| {
                let page = source.clone();
                let factory = move || load_simulator(page.clone());
                validate(
                    &factory,
                    "bench",
                    &tasks,
                    &policy,
                    &policy,
                    DEFAULT_ROUND_CAP,
                    mode,
                )
                .expect("validation")
            })
        });
    }
    group.finish();
}

criterion_group!(modes_benches, bench_explore, bench_validate);
criterion_main!(modes_benches);
