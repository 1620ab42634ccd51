"""Two-sample closeness testing for discrete distributions with local separation rates."""
from .adversarial import (AdversarialPrior, PriorDraw, build_prior, sample_alt, sample_alt_smalltail, sample_null,
                          scale_for_separation, separation_bound)
from .distmodel import (DiscreteDistribution, LevelSetMap, SortedView, in_class_p_pi, j_index, level_sets,
                        make_distribution, sorted_view)
from .errors import (BadParameter, BudgetTooSmall, ClosenessError, DimensionMismatch, EmptyVector, GuardError,
                     KTooLargeForDesk, KTooSmall, NegativeEntry, RenormalizationImpossible, RetryCapExceeded,
                     Unreachable, ZeroSum)
from .harness import (RiskEstimate, SeparationEstimate, compare_report, empirical_separation, estimate_risk,
                      family_two_level, family_two_spike, family_uniform, family_zipf)
from .rates import RateBreakdown, c_pi, dk16_rate, i_v_pi, identity_rate, lower_rate, regime_table, upper_rate
from .sampling import (RngStream, SplitCounts, sample_multinomial, sample_poissonized_direct,
                       split_and_poissonize)
from .testers import (TestConstants, TestReport, calibrate_constants, combined_test, pretest_linf, stat_t1,
                      stat_t2, stat_t23, test_1, test_2, test_23, thresh_t2, thresh_t23)

__version__ = "0.1.0"
