"""
Smoke tests for the demo walkthrough.
"""

import pytest
import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import demo


@pytest.mark.integration
class TestDemo:
    """Test every demo section runs to completion."""

    def test_kernel_similarity(self, capsys):
        """Test the kernel section prints both kernel values and the baselines."""
        demo.demo_kernel_similarity()
        out = capsys.readouterr().out
        assert "K(X, X')" in out
        assert "Frechet(X, X')" in out

    def test_sections(self, capsys):
        """Test the detection, sub-trajectory and mining sections."""
        demo.demo_anomaly_detection()
        demo.demo_subtrajectory()
        demo.demo_pattern_mining()
        out = capsys.readouterr().out
        assert "idk2" in out
        assert "Jaccard" in out
        assert "Patterns:" in out

    def test_main_completes(self, capsys):
        """Test the full walkthrough reports success."""
        demo.main()
        out = capsys.readouterr().out
        assert "All demos completed successfully" in out
        assert "Demo failed" not in out


if __name__ == "__main__":
    pytest.main([__file__])
