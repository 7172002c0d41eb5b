"""Random-forest similarity kernels for SVM classification on HDLSS data."""

from .data import (
    Dataset,
    HdlssProfile,
    SplitPlan,
    hdlss_profile,
    imbalance_ratio,
    kfold_indices,
    load_csv,
    omega,
    random_half_splits,
)
from .forest import (
    ForestHyperparams,
    ForestModel,
    Tree,
    bootstrap_sample,
    fit_forest,
    fit_tree,
    leaf_of,
    load_forest,
    predict_forest,
    save_forest,
)
from .harness import (
    ExperimentConfig,
    MethodResult,
    accuracy,
    assemble_report,
    micro_f1,
    run_experiment,
    run_method_on_dataset,
    tune_and_fit,
)
from .kernel import (
    KernelMatrix,
    cosine_kernel,
    load_kernel,
    rbf_kernel,
    rf_kernel_test,
    rf_kernel_train,
    rf_similarity,
    save_kernel,
    validate_kernel,
)
from .stats import (
    BayesReport,
    FriedmanReport,
    ScoreTable,
    bayesian_sign_test,
    friedman_nemenyi,
    nemenyi_critical_difference,
    rank_methods,
)
from .svm import (
    BinarySvmModel,
    SvmHyperparams,
    SvmModel,
    decision_value,
    fit_multiclass,
    load_svm,
    predict,
    save_svm,
    solve_binary_smo,
)

__version__ = "0.1.0"
