#pragma once

#include "fairgkd/graph.hpp"
#include "fairgkd/tensor.hpp"

#include <string>
#include <vector>

namespace fairgkd {

enum class Backbone { Gcn, Gin };

std::string to_string(Backbone b);
Backbone backbone_from_string(const std::string& s);

enum class Activation { None, Relu };

/// activation(adj_norm * h * w + b)
Tensor gcn_layer(const CsrPtr& adj_norm, const Tensor& h, const Tensor& w, const Tensor& b,
                 Activation act = Activation::None);

struct Linear {
    Tensor weight; // in x out
    Tensor bias;   // 1 x out

    Linear() = default;
    Linear(int in_dim, int out_dim, Rng& rng);

    Tensor forward(const Tensor& x) const;
    int in_dim() const { return weight.rows(); }
    int out_dim() const { return weight.cols(); }
    std::vector<Tensor> parameters() const { return {weight, bias}; }
};

/// Fully connected stack with ReLU between layers and a linear output.
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    Mlp(const std::vector<int>& dims, Rng& rng);

    Tensor forward(const Tensor& x) const;
    int in_dim() const { return layers.front().in_dim(); }
    int out_dim() const { return layers.back().out_dim(); }
    std::vector<Tensor> parameters() const;
};

/// mlp((1 + eps) * h + adj_raw * h); eps is fixed, not learned.
Tensor gin_layer(const CsrPtr& adj_raw, const Tensor& h, const Mlp& mlp, double eps = 0.0);

namespace modeldetail {
void set_frozen(std::vector<Tensor> params, bool frozen);
}

// ----------------------------------------------------------------------------
// Named model assemblies.
//
// Representations are the pre-activation output of the last backbone layer;
// classifier heads apply ReLU to the representation before their linear map.
// ----------------------------------------------------------------------------

/// Fairness expert trained on node attributes alone: a 2-layer MLP.
class AttributeExpert {
public:
    AttributeExpert() = default;
    AttributeExpert(int in_dim, int hidden, Rng& rng);

    /// Requires a NodesOnly view.
    Tensor representation(const ViewData& view) const;
    std::vector<Tensor> parameters() const { return body_.parameters(); }
    void freeze();
    bool frozen() const { return frozen_; }
    int hidden_dim() const { return body_.out_dim(); }
    const Mlp& body() const { return body_; }
    Mlp& body() { return body_; }

private:
    Mlp body_;
    bool frozen_ = false;
};

/// Fairness expert trained on topology alone: a single GCN convolution over
/// the all-one attribute matrix.
class StructureExpert {
public:
    StructureExpert() = default;
    StructureExpert(int in_dim, int hidden, Rng& rng);

    /// Requires a TopologyOnly view.
    Tensor representation(const ViewData& view) const;
    std::vector<Tensor> parameters() const { return {weight_, bias_}; }
    void freeze();
    bool frozen() const { return frozen_; }
    int hidden_dim() const { return weight_.cols(); }
    Tensor& weight() { return weight_; }
    Tensor& bias() { return bias_; }

private:
    Tensor weight_;
    Tensor bias_;
    bool frozen_ = false;
};

/// 3-layer MLP fusing the concatenated expert representations into the
/// reference embedding space.
class FusionProjector {
public:
    FusionProjector() = default;
    FusionProjector(int expert_hidden, int out_dim, Rng& rng);

    Tensor fuse(const Tensor& attr_rep, const Tensor& struct_rep) const;
    std::vector<Tensor> parameters() const { return body_.parameters(); }
    void freeze();
    bool frozen() const { return frozen_; }
    const Mlp& body() const { return body_; }
    Mlp& body() { return body_; }

private:
    Mlp body_;
    bool frozen_ = false;
};

struct ModelSpec {
    Backbone backbone = Backbone::Gcn;
    int in_dim = 0;
    int hidden = 16;

    bool operator==(const ModelSpec&) const = default;
};

/// The student architecture: one backbone convolution plus a linear
/// classifier head. Also serves as the reference network and every
/// partial-data baseline classifier.
class StudentNet {
public:
    StudentNet() = default;
    StudentNet(Backbone backbone, int in_dim, int hidden, Rng& rng);

    /// Pre-activation backbone output, n x hidden.
    Tensor representation(const ViewData& view) const;
    /// head(relu(representation)), one logit column.
    Tensor logits_from(const Tensor& rep) const;
    std::pair<Tensor, Tensor> forward(const ViewData& view) const; // (rep, logits)

    std::vector<Tensor> parameters() const;
    void freeze();
    bool frozen() const { return frozen_; }
    const ModelSpec& spec() const { return spec_; }

    /// sigmoid(logit) >= 0.5 thresholding.
    static std::vector<int8_t> predictions(const Tensor& logits);

    void save(const std::string& path) const;
    static StudentNet load(const std::string& path);

private:
    ModelSpec spec_;
    // GCN backbone
    Tensor conv_weight_;
    Tensor conv_bias_;
    // GIN backbone
    Mlp gin_mlp_;
    Linear head_;
    bool frozen_ = false;
};

/// Frozen experts plus projector: the teacher whose representation the
/// student mimics.
struct SyntheticTeacher {
    AttributeExpert attr_expert;
    StructureExpert struct_expert;
    FusionProjector projector;

    /// Requires all three parts frozen. Views must be NodesOnly and
    /// TopologyOnly of the same graph.
    Tensor representation(const ViewData& nodes_view, const ViewData& topo_view) const;
    std::vector<Tensor> parameters() const;
};

} // namespace fairgkd
