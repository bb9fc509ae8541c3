"""
Metrics collection and Prometheus integration for calib7 verification runs.
"""
import time
from typing import Dict, Optional

import structlog
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

logger = structlog.get_logger(__name__)

registry = CollectorRegistry()

# Check metrics
checks_total = Counter('calib7_checks_total', 'Total number of residual checks run',
                       ['check', 'outcome'], registry=registry)
check_residual = Histogram('calib7_check_residual', 'Maximum residual per check', ['check'],
                           buckets=(1e-15, 1e-13, 1e-12, 1e-10, 1e-8, 1e-6, 1e-5, 1e-4, 1e-3,
                                    1e-2, 1e-1, 1.0, float('inf')),
                           registry=registry)
check_duration = Histogram('calib7_check_duration_seconds', 'Check wall time in seconds', ['check'],
                           registry=registry)
excluded_nodes = Counter('calib7_excluded_nodes_total', 'Nodes excluded from checks',
                         ['check', 'reason'], registry=registry)

# Sampling metrics
samples_drawn = Counter('calib7_samples_drawn_total', 'Random tuples drawn by comass sampling',
                        ['grade'], registry=registry)
comass_max = Gauge('calib7_comass_max', 'Largest sampled form value', ['grade'], registry=registry)
run_seconds = Gauge('calib7_run_seconds', 'Wall time of the run up to the metrics dump', registry=registry)


class MetricsCollector:
    """Metrics collector for verification runs."""

    def __init__(self):
        """Initialize metrics collector."""
        self.start_time = time.time()

    def record_check(self, report_data: Dict):
        """Record a finished check."""
        try:
            name = report_data.get('name', 'unknown')
            outcome = 'pass' if report_data.get('passed', False) else 'fail'
            checks_total.labels(check=name, outcome=outcome).inc()

            residual = report_data.get('max_residual')
            if residual is not None:
                check_residual.labels(check=name).observe(float(residual))

            duration = report_data.get('duration')
            if duration is not None:
                check_duration.labels(check=name).observe(duration)

            n_excluded = report_data.get('n_excluded', 0)
            if n_excluded:
                excluded_nodes.labels(check=name, reason='excluded').inc(n_excluded)

        except Exception as e:
            logger.error("Error recording check metrics", error=str(e))

    def record_sampling(self, grade: int, count: int, max_value: float):
        """Record a comass sampling pass."""
        try:
            samples_drawn.labels(grade=str(grade)).inc(count)
            comass_max.labels(grade=str(grade)).set(max_value)
        except Exception as e:
            logger.error("Error recording sampling metrics", error=str(e))

    def dump(self, path: Optional[str]):
        """Write the registry in Prometheus text format."""
        if not path:
            return
        try:
            run_seconds.set(time.time() - self.start_time)
            write_to_textfile(path, registry)
            logger.info("Metrics written", path=path)
        except Exception as e:
            logger.error("Error writing metrics", path=path, error=str(e))


# Global metrics collector instance
metrics_collector = MetricsCollector()
