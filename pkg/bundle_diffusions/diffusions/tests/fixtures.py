from diffusions.checks import CheckResult, RunConfig, SuiteReport


def suite_report(passed=True, scenario='torus-flat', seed=5):
    """A small SuiteReport with one record per comparator and a short trace"""
    config = RunConfig(scenario=scenario, dt=1e-3, horizon=1.0, n_paths=2, cloud_size=17, seed=seed)
    records = [
        CheckResult('retraction-idempotence', 'retraction onto the manifold is idempotent', 1e-15, 1e-12, 'le', True),
        CheckResult(
            'reconstruction-order', 'b_t = y_t g_t pathwise: refinement order',
            0.98 if passed else float('nan'), 0.9, 'ge', passed, '' if passed else 'StepSizeError: step too large',
        ),
    ]
    traces = {'reconstruction': (['t', 'defect'], [[0.0, 0.0], [0.5, 1e-4]])}
    return SuiteReport(config, ['skew'], records, traces)
