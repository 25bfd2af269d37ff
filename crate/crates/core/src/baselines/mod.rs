//! Linear and forest baselines with cross-validated hyperparameter search.

pub mod cv;
pub mod elastic_net;
pub mod forest;
pub mod rfecv;

pub use cv::{fold_split, mean_std, stratified_folds, CvCandidate, CvSearchReport};
pub use elastic_net::{
    fit_elastic_net_fixed, kkt_violation, lambda_max_l1, lambda_path, logit, predict_linear,
    train_elastic_net, ElasticNetModel, ElasticNetSearch,
};
pub use forest::{
    fit_forest, predict_forest, train_random_forest, DecisionTree, ForestHyper, ForestModel,
    ForestSearch, TreeNode,
};
pub use rfecv::{rfecv_select, RfecvConfig, RfecvReport};
