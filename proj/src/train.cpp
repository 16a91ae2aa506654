#include "dsal/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dsal/checkpoint.hpp"
#include "dsal/common.hpp"
#include "dsal/image.hpp"
#include "dsal/supervision.hpp"

namespace dsal {

namespace {

Tensor flip_lr(const Tensor& x) {
    Tensor out(x.n(), x.c(), x.h(), x.w());
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int y = 0; y < x.h(); ++y)
                for (int xx = 0; xx < x.w(); ++xx)
                    out.at(n, c, y, xx) = x.at(n, c, y, x.w() - 1 - xx);
    return out;
}

void check_samples(const std::vector<Sample>& data) {
    if (data.empty()) throw DataError("train: no samples");
    for (const auto& s : data) {
        if (s.image.n() != 1 || s.image.c() != 3)
            throw DataError("train: sample images must be (1,3,H,W), got " +
                            s.image.shape_str());
        if (s.mask.n() != 1 || s.mask.c() != 1)
            throw DataError("train: sample masks must be (1,1,H,W), got " + s.mask.shape_str());
    }
}

void check_config(const TrainConfig& cfg) {
    if (cfg.iterations < 1) throw DataError("train: iterations must be >= 1");
    if (cfg.batch_size < 1) throw DataError("train: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw DataError("train: learning_rate must be > 0");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        throw DataError("train: momentum must be in [0, 1)");
    if (!(cfg.weight_decay >= 0.0)) throw DataError("train: weight_decay must be >= 0");
    if (!(cfg.head_lr_multiplier > 0.0)) throw DataError("train: head multiplier must be > 0");
}

// stack per-sample tensors into one batch
Tensor stack(const std::vector<Tensor>& parts) {
    const Tensor& first = parts.front();
    Tensor out(static_cast<int>(parts.size()), first.c(), first.h(), first.w());
    const size_t plane = first.size();
    for (size_t i = 0; i < parts.size(); ++i)
        std::copy(parts[i].data(), parts[i].data() + plane, out.data() + i * plane);
    return out;
}

struct Batch {
    Tensor images, masks;
};

Batch assemble(const std::vector<Sample>& data, const std::vector<size_t>& picks, int h, int w,
               bool flip, Rng& rng) {
    std::vector<Tensor> imgs, masks;
    imgs.reserve(picks.size());
    masks.reserve(picks.size());
    for (size_t idx : picks) {
        const bool mirror = flip && rng.coin();
        Sample s = fit_sample(data[idx], h, w, mirror);
        imgs.push_back(std::move(s.image));
        masks.push_back(std::move(s.mask));
    }
    return {stack(imgs), stack(masks)};
}

// unaugmented probe batch: deterministic loss yardstick before/after training
Batch probe_batch(const std::vector<Sample>& data, int batch_size, int h, int w) {
    std::vector<size_t> picks;
    for (size_t i = 0; i < std::min(data.size(), static_cast<size_t>(batch_size)); ++i)
        picks.push_back(i);
    Rng never(0);
    return assemble(data, picks, h, w, false, never);
}

// endless seeded sample stream with per-epoch reshuffling
class Shuffler {
public:
    Shuffler(size_t n, Rng& rng) : order_(n), pos_(n), rng_(rng) {
        std::iota(order_.begin(), order_.end(), size_t{0});
    }
    size_t next() {
        if (pos_ >= order_.size()) {
            for (size_t i = order_.size(); i > 1; --i)
                std::swap(order_[i - 1], order_[static_cast<size_t>(rng_.below(i))]);
            pos_ = 0;
        }
        return order_[pos_++];
    }

private:
    std::vector<size_t> order_;
    size_t pos_;
    Rng& rng_;
};

using LossFn = Var (*)(const Model&, const Var&, const Tensor&);

Var general_loss(const Model& m, const Var& images, const Tensor& g0) {
    const PredictionBundle b = m.forward_general(images);
    std::vector<Var> terms;
    terms.reserve(b.m0.size());
    for (const Var& map : b.m0) terms.push_back(bce_mean(map, g0));
    return add_all(terms);
}

Var task_loss(const Model& m, const Var& images, const Tensor& g0) {
    return total_loss(m.forward(images), g0);
}

TrainResult run_training(Model& m, const std::vector<Sample>& data, const TrainConfig& cfg,
                         LossFn loss_fn, Sgd& opt, CheckpointKind snapshot_kind,
                         const char* tag) {
    const int h = m.config().input_height;
    const int w = m.config().input_width;

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path, std::ios::trunc);
        if (!log) throw DataError("train: cannot write log: " + cfg.log_path);
        log << "iteration,loss\n";
    }
    if (!cfg.checkpoint_dir.empty())
        std::filesystem::create_directories(cfg.checkpoint_dir);

    const Batch probe = probe_batch(data, cfg.batch_size, h, w);
    auto probe_loss = [&] {
        return loss_fn(m, make_input(probe.images), probe.masks).value().item();
    };

    TrainResult result;
    result.initial_loss = probe_loss();

    Rng rng(cfg.seed);
    Shuffler shuffler(data.size(), rng);
    const long ckpt_interval = std::max<long>(1, cfg.iterations / 10);

    for (long it = 1; it <= cfg.iterations; ++it) {
        std::vector<size_t> picks(static_cast<size_t>(cfg.batch_size));
        for (auto& p : picks) p = shuffler.next();
        const Batch batch = assemble(data, picks, h, w, cfg.flip, rng);

        m.params().zero_grad_all();
        const Var loss = loss_fn(m, make_input(batch.images), batch.masks);
        const double lv = loss.value().item();
        if (!std::isfinite(lv))
            throw DivergenceError("training loss became non-finite at iteration " +
                                  std::to_string(it));
        backward(loss);
        opt.step();

        if (log) log << it << ',' << lv << '\n';
        if (!cfg.checkpoint_dir.empty() && it % ckpt_interval == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "%s_%06ld.dsck", tag, it);
            const auto path = (std::filesystem::path(cfg.checkpoint_dir) / name).string();
            save_model(path, m, snapshot_kind);
            result.checkpoint_paths.push_back(path);
        }
        ++result.iterations_run;
    }

    result.final_loss = probe_loss();
    if (!std::isfinite(result.final_loss))
        throw DivergenceError("parameters became non-finite during training");
    if (!cfg.checkpoint_dir.empty()) {
        const auto path =
            (std::filesystem::path(cfg.checkpoint_dir) / (std::string(tag) + "_final.dsck"))
                .string();
        save_model(path, m, snapshot_kind);
        result.checkpoint_paths.push_back(path);
    }
    return result;
}

}  // namespace

Sample fit_sample(const Sample& s, int height, int width, bool mirror) {
    Sample out;
    out.image = (s.image.h() == height && s.image.w() == width)
                    ? s.image
                    : resize_bilinear_value(s.image, height, width);
    out.mask = resize_nearest(s.mask, height, width);
    if (mirror) {
        out.image = flip_lr(out.image);
        out.mask = flip_lr(out.mask);
    }
    return out;
}

TrainResult train_general(Model& m, const std::vector<Sample>& data, const TrainConfig& cfg) {
    check_config(cfg);
    check_samples(data);
    Sgd opt(cfg.learning_rate, cfg.momentum, cfg.weight_decay);
    opt.add_group(m.group_params("general"), 1.0);
    opt.add_group(m.group_params("general_head"), cfg.head_lr_multiplier);
    return run_training(m, data, cfg, &general_loss, opt, CheckpointKind::General, "general");
}

TrainResult train_task(Model& m, const std::vector<Sample>& data, const TrainConfig& cfg) {
    check_config(cfg);
    check_samples(data);
    if (m.config().use_pretrained_general)
        m.params().copy_values("general/", "task/");

    // the general tower only serves, it never learns here
    m.params().set_trainable("general/", false);
    m.params().set_trainable("general_head/", false);
    const auto frozen_before = m.params().content_hash("general");

    Sgd opt(cfg.learning_rate, cfg.momentum, cfg.weight_decay);
    for (const auto& g : m.group_names()) {
        if (g == "general" || g == "general_head") continue;
        opt.add_group(m.group_params(g), g == "task" ? 1.0 : cfg.head_lr_multiplier);
    }
    TrainResult r = run_training(m, data, cfg, &task_loss, opt, CheckpointKind::Full, "task");

    if (m.params().content_hash("general") != frozen_before)
        throw std::logic_error("frozen general parameters changed during task training");
    return r;
}

GradCheckReport grad_check(Model& m, const Tensor& images, const Tensor& masks,
                           int samples_per_group, std::uint64_t seed) {
    if (samples_per_group < 1) throw DataError("grad_check: samples_per_group must be >= 1");
    auto loss_value = [&] {
        return total_loss_value(m.forward(make_input(images)), masks);
    };

    // one backward gives every analytic derivative
    m.params().zero_grad_all();
    const Var loss = total_loss(m.forward(make_input(images)), masks);
    backward(loss);

    GradCheckReport report;
    Rng rng(seed ^ 0x9d5ec816a9040e10ull);
    for (const auto& group : m.group_names()) {
        auto params = m.group_params(group);
        size_t total = 0;
        for (const auto& p : params) total += p.value().size();

        GradCheckGroup gr;
        gr.group = group;
        const size_t want = std::min<size_t>(total, static_cast<size_t>(samples_per_group));
        for (size_t k = 0; k < want; ++k) {
            // flat index into the concatenated collection
            size_t flat = rng.below(total);
            size_t pi = 0;
            while (flat >= params[pi].value().size()) {
                flat -= params[pi].value().size();
                ++pi;
            }
            Tensor& theta = params[pi].value();
            const Tensor& g = params[pi].grad();
            const double analytic = g.empty() ? 0.0 : g[flat];

            const double orig = theta[flat];
            const double eps = 1e-4 * std::max(1.0, std::fabs(orig));
            theta[flat] = orig + eps;
            const double up = loss_value();
            theta[flat] = orig - eps;
            const double down = loss_value();
            theta[flat] = orig;

            const double numeric = (up - down) / (2.0 * eps);
            const double rel = std::fabs(analytic - numeric) /
                               std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
            gr.max_rel = std::max(gr.max_rel, rel);
            ++gr.checked;
        }
        report.max_rel = std::max(report.max_rel, gr.max_rel);
        report.groups.push_back(std::move(gr));
    }
    return report;
}

}  // namespace dsal
