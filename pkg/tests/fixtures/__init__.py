"""Model files and experiment configs shared by the test suites."""
