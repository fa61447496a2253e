import hypothesis

# BLAS-heavy examples can blow hypothesis' default per-example deadline on
# loaded CI machines; wall-clock limits live in the acceptance tests instead.
hypothesis.settings.register_profile(
    "fdridge", deadline=None, derandomize=True,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("fdridge")
