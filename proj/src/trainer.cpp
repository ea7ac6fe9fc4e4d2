#include "taxalign/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace taxalign {

namespace {

constexpr std::size_t kFullSoftmaxVocabLimit = 2000;

struct Vocab {
    std::vector<std::string> tokens; // first-appearance order
    std::unordered_map<std::string, int> index;
    std::vector<long> counts;
};

Vocab build_vocab(const Corpus& corpus, int min_count) {
    Vocab vocab;
    std::unordered_map<std::string, long> counts;
    std::vector<std::string> order;
    for (const auto& [id, tokens] : corpus.documents) {
        for (const auto& token : tokens) {
            if (counts[token]++ == 0) order.push_back(token);
        }
    }
    for (const auto& token : order) {
        long count = counts[token];
        if (count < min_count) continue;
        vocab.index.emplace(token, static_cast<int>(vocab.tokens.size()));
        vocab.tokens.push_back(token);
        vocab.counts.push_back(count);
    }
    return vocab;
}

// Cumulative unigram^0.75 distribution for negative sampling.
std::vector<double> noise_cdf(const std::vector<long>& counts) {
    std::vector<double> cdf(counts.size());
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        total += std::pow(static_cast<double>(counts[i]), 0.75);
        cdf[i] = total;
    }
    for (double& v : cdf) v /= total;
    return cdf;
}

int sample_noise(const std::vector<double>& cdf, std::mt19937_64& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    return static_cast<int>(std::min<std::size_t>(it - cdf.begin(),
                                                  cdf.size() - 1));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One SGD step for either mode on a single (input rows, target) pair.
// `inputs` are row indices into `in`, averaged to form the hidden vector.
double train_pair(Eigen::MatrixXd& in, Eigen::MatrixXd& out,
                  const std::vector<int>& inputs, int target, double lr,
                  const TrainerConfig& cfg, const std::vector<double>& cdf,
                  std::mt19937_64& rng) {
    const double inv = 1.0 / static_cast<double>(inputs.size());
    Eigen::VectorXd hidden = Eigen::VectorXd::Zero(in.cols());
    for (int row : inputs) hidden += in.row(row).transpose();
    hidden *= inv;

    Eigen::VectorXd hidden_grad = Eigen::VectorXd::Zero(in.cols());
    double loss = 0.0;

    if (cfg.softmax_mode == SoftmaxMode::full) {
        Eigen::VectorXd scores = out * hidden;
        double max_score = scores.maxCoeff();
        Eigen::VectorXd probs = (scores.array() - max_score).exp();
        double z = probs.sum();
        probs /= z;
        loss = -scores(target) + max_score + std::log(z);
        // dL/du_j = (p_j - [j == target]) * hidden
        Eigen::VectorXd grad = probs;
        grad(target) -= 1.0;
        hidden_grad = out.transpose() * grad;
        out.noalias() -= lr * grad * hidden.transpose();
    } else {
        for (int s = 0; s <= cfg.negative_samples; ++s) {
            int word;
            double label;
            if (s == 0) {
                word = target;
                label = 1.0;
            } else {
                word = sample_noise(cdf, rng);
                if (word == target) continue;
                label = 0.0;
            }
            double score = out.row(word).dot(hidden);
            double pred = sigmoid(score);
            loss -= label > 0.5 ? std::log(std::max(pred, 1e-12))
                                : std::log(std::max(1.0 - pred, 1e-12));
            double g = pred - label;
            hidden_grad += g * out.row(word).transpose();
            out.row(word) -= lr * g * hidden.transpose();
        }
    }

    Eigen::RowVectorXd delta = (lr * inv) * hidden_grad.transpose();
    for (int row : inputs) in.row(row) -= delta;
    return loss;
}

struct TrainingPair {
    int doc = 0; // PV-DBOW input row
    std::vector<int> context; // CBOW input rows
    int target = 0;
};

TrainResult run_training(const std::vector<TrainingPair>& pairs,
                         Eigen::Index input_rows, const Vocab& vocab,
                         const TrainerConfig& cfg, bool pvdbow,
                         const std::vector<std::string>& row_names) {
    if (pairs.empty()) throw DataError("trainer: no training pairs");
    if (cfg.softmax_mode == SoftmaxMode::full &&
        vocab.tokens.size() > kFullSoftmaxVocabLimit) {
        throw ConfigError("full softmax limited to vocabularies of " +
                          std::to_string(kFullSoftmaxVocabLimit) + " words");
    }

    std::mt19937_64 rng(cfg.seed);
    auto uniform = [&rng]() {
        return std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    };
    Eigen::MatrixXd in(input_rows, cfg.dim);
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
        for (int j = 0; j < cfg.dim; ++j) in(i, j) = uniform() / cfg.dim;
    }
    Eigen::MatrixXd out =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vocab.tokens.size()),
                              cfg.dim);

    std::vector<double> cdf = noise_cdf(vocab.counts);
    const long total_updates =
        static_cast<long>(pairs.size()) * std::max(cfg.epochs, 1);
    long done = 0;

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (const auto& pair : pairs) {
            double progress = static_cast<double>(done) / total_updates;
            double lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * progress;
            if (pvdbow) {
                std::vector<int> inputs{pair.doc};
                epoch_loss += train_pair(in, out, inputs, pair.target, lr, cfg,
                                         cdf, rng);
            } else {
                epoch_loss += train_pair(in, out, pair.context, pair.target,
                                         lr, cfg, cdf, rng);
            }
            ++done;
        }
        result.loss_history.push_back(epoch_loss / pairs.size());
    }

    result.vectors.tokens = row_names;
    result.vectors.matrix = std::move(in);
    for (std::size_t i = 0; i < row_names.size(); ++i) {
        result.vectors.index.emplace(row_names[i],
                                     static_cast<Eigen::Index>(i));
    }
    return result;
}

} // namespace

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file '" + path + "'");
    Corpus corpus;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected 'doc-id<TAB>tokens'");
        }
        std::string id = line.substr(0, tab);
        std::vector<std::string> tokens;
        std::istringstream ss(line.substr(tab + 1));
        std::string token;
        while (ss >> token) tokens.push_back(token);
        for (const auto& [existing, _] : corpus.documents) {
            if (existing == id) {
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": duplicate doc-id '" + id + "'");
            }
        }
        corpus.documents.emplace_back(std::move(id), std::move(tokens));
    }
    return corpus;
}

TrainResult train_cbow(const Corpus& corpus, const TrainerConfig& cfg) {
    if (corpus.documents.empty()) throw DataError("train_cbow: empty corpus");
    Vocab vocab = build_vocab(corpus, cfg.min_count);

    std::vector<TrainingPair> pairs;
    for (const auto& [id, tokens] : corpus.documents) {
        std::vector<int> ids;
        for (const auto& token : tokens) {
            auto it = vocab.index.find(token);
            if (it != vocab.index.end()) ids.push_back(it->second);
        }
        const int n = static_cast<int>(ids.size());
        for (int i = 0; i < n; ++i) {
            TrainingPair pair;
            pair.target = ids[i];
            // Window clipped at sentence edges; averaged over the actual
            // number of context tokens.
            for (int j = std::max(0, i - cfg.window);
                 j <= std::min(n - 1, i + cfg.window); ++j) {
                if (j != i) pair.context.push_back(ids[j]);
            }
            if (!pair.context.empty()) pairs.push_back(std::move(pair));
        }
    }
    return run_training(pairs, static_cast<Eigen::Index>(vocab.tokens.size()),
                        vocab, cfg, /*pvdbow=*/false, vocab.tokens);
}

TrainResult train_pvdbow(const Corpus& corpus, const TrainerConfig& cfg) {
    if (corpus.documents.empty()) throw DataError("train_pvdbow: empty corpus");
    Vocab vocab = build_vocab(corpus, cfg.min_count);

    std::vector<std::string> doc_ids;
    std::vector<TrainingPair> pairs;
    for (const auto& [id, tokens] : corpus.documents) {
        int doc_row = static_cast<int>(doc_ids.size());
        doc_ids.push_back(id);
        long covered = 0;
        for (const auto& token : tokens) {
            auto it = vocab.index.find(token);
            if (it == vocab.index.end()) continue;
            TrainingPair pair;
            pair.doc = doc_row;
            pair.target = it->second;
            pairs.push_back(pair);
            ++covered;
        }
        if (covered == 0) {
            throw DataError("train_pvdbow: document '" + id +
                            "' has no training pairs");
        }
    }
    return run_training(pairs, static_cast<Eigen::Index>(doc_ids.size()),
                        vocab, cfg, /*pvdbow=*/true, doc_ids);
}

double gradient_check(const TrainerConfig& cfg, int vocab, int context_size,
                      std::uint64_t seed, bool zero_output) {
    if (cfg.softmax_mode != SoftmaxMode::full) {
        throw ConfigError("gradient_check requires full softmax mode");
    }
    if (vocab > 50 || cfg.dim > 8) {
        throw ConfigError("gradient_check: vocab <= 50 and dim <= 8 required");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd in(vocab, cfg.dim);
    Eigen::MatrixXd out(vocab, cfg.dim);
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
        for (int j = 0; j < cfg.dim; ++j) {
            in(i, j) = normal(rng);
            out(i, j) = zero_output ? 0.0 : normal(rng);
        }
    }
    std::vector<int> context;
    for (int i = 0; i < context_size; ++i) {
        context.push_back(static_cast<int>(rng() % vocab));
    }
    int target = static_cast<int>(rng() % vocab);

    auto loss = [&](const Eigen::MatrixXd& w, const Eigen::MatrixXd& u) {
        Eigen::VectorXd hidden = Eigen::VectorXd::Zero(cfg.dim);
        for (int row : context) hidden += w.row(row).transpose();
        hidden /= static_cast<double>(context.size());
        Eigen::VectorXd scores = u * hidden;
        double max_score = scores.maxCoeff();
        return -scores(target) + max_score +
               std::log((scores.array() - max_score).exp().sum());
    };

    // Analytic gradients.
    Eigen::VectorXd hidden = Eigen::VectorXd::Zero(cfg.dim);
    for (int row : context) hidden += in.row(row).transpose();
    hidden /= static_cast<double>(context.size());
    Eigen::VectorXd scores = out * hidden;
    Eigen::VectorXd probs = (scores.array() - scores.maxCoeff()).exp();
    probs /= probs.sum();
    Eigen::VectorXd grad_scores = probs;
    grad_scores(target) -= 1.0;
    Eigen::MatrixXd grad_out = grad_scores * hidden.transpose();
    Eigen::VectorXd grad_hidden = out.transpose() * grad_scores;
    Eigen::MatrixXd grad_in = Eigen::MatrixXd::Zero(vocab, cfg.dim);
    for (int row : context) {
        grad_in.row(row) +=
            grad_hidden.transpose() / static_cast<double>(context.size());
    }

    const double step = 1e-5;
    double max_rel = 0.0;
    auto compare = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& analytic) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (int j = 0; j < cfg.dim; ++j) {
                double saved = m(i, j);
                m(i, j) = saved + step;
                double up = loss(in, out);
                m(i, j) = saved - step;
                double down = loss(in, out);
                m(i, j) = saved;
                double numeric = (up - down) / (2.0 * step);
                double a = analytic(i, j);
                double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
                max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
            }
        }
    };
    compare(in, grad_in);
    compare(out, grad_out);
    return max_rel;
}

} // namespace taxalign
