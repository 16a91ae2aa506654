#ifndef DSAL_NN_HPP
#define DSAL_NN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dsal/autograd.hpp"
#include "dsal/common.hpp"

namespace dsal {

enum class Init { HeNormal, Zero, One };

// Owns every trainable tensor of a model, keyed by a hierarchical name
// ("task/stage3/block1/conv2/w"). Initialization is seeded per name, so the
// same (seed, name) pair always produces the same values no matter in which
// order parameters are created — ablation variants share identical weights
// for the parts they have in common.
class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // create-or-fetch; shape must match on refetch
    Var get(const std::string& name, int n, int c, int h, int w, Init init);

    bool has(const std::string& name) const { return params_.count(name) > 0; }
    Var at(const std::string& name) const;

    // parameters whose name starts with prefix, in name order
    std::vector<std::pair<std::string, Var>> items(const std::string& prefix = "") const;
    std::size_t value_count(const std::string& prefix = "") const;

    // FNV-1a over the raw bytes of every parameter under prefix, name order
    std::uint64_t content_hash(const std::string& prefix) const;

    void zero_grad_all();
    void set_trainable(const std::string& prefix, bool trainable);

    // copy values from src_prefix/X into dst_prefix/X for every matching name
    void copy_values(const std::string& src_prefix, const std::string& dst_prefix);

private:
    std::uint64_t seed_;
    std::map<std::string, Var> params_;
};

// ---- layer wrappers ------------------------------------------------------

struct Conv2d {
    Var w, b;
    int stride = 1, pad = 0, dilation = 1;
    Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad, dilation); }
};

// pad < 0 selects "same" padding for odd kernels: pad = dilation * (k-1) / 2
Conv2d make_conv(ParamStore& ps, const std::string& name, int cin, int cout, int k,
                 int stride = 1, int pad = -1, int dilation = 1, bool bias = true,
                 Init init = Init::HeNormal);

struct ConvTranspose2d {
    Var w, b;
    int stride = 2, pad = 1;
    Var operator()(const Var& x) const { return conv_transpose2d(x, w, b, stride, pad); }
};

ConvTranspose2d make_deconv(ParamStore& ps, const std::string& name, int cin, int cout, int k,
                            int stride = 2, int pad = 1);

// group normalization (tiny profile) or frozen batch statistics (pretrained
// profile) behind one call site
struct Norm {
    enum class Kind { Group, Frozen };
    Kind kind = Kind::Group;
    Var gamma, beta;
    int groups = 1;
    Tensor mean, var;  // frozen kind only
    Var operator()(const Var& x) const {
        if (kind == Kind::Group) return group_norm(x, gamma, beta, groups);
        return frozen_norm(x, gamma, beta, mean, var);
    }
};

Norm make_group_norm(ParamStore& ps, const std::string& name, int channels);
Norm make_frozen_norm(ParamStore& ps, const std::string& name, int channels);

// ---- optimizer -----------------------------------------------------------

// classic momentum SGD: v <- mu*v + g + wd*p ; p <- p - lr*scale*v
class Sgd {
public:
    Sgd(double lr, double momentum, double weight_decay)
        : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

    void add_group(std::vector<Var> params, double lr_scale);
    void step();
    void zero_grad();
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    std::size_t group_count() const { return groups_.size(); }
    double group_scale(std::size_t i) const { return groups_[i].scale; }

private:
    struct Group {
        std::vector<Var> params;
        double scale;
    };
    double lr_, momentum_, weight_decay_;
    std::vector<Group> groups_;
    std::unordered_map<Node*, Tensor> velocity_;
};

}  // namespace dsal

#endif
