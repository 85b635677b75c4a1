#include "vsegan/net.hpp"

#include <cmath>

#include "vsegan/rng.hpp"

namespace vsegan {

namespace {

std::string stage_name(std::size_t k) { return "stage " + std::to_string(k + 1); }

template <typename T>
void check4(const Var<T>& v, const Shape& chw, const std::string& what) {
  const Shape& got = v.shape();
  require(got.size() == 4 && got[1] == chw[0] && got[2] == chw[1] && got[3] == chw[2],
          what + ": expected [N," + std::to_string(chw[0]) + "," + std::to_string(chw[1]) + "," +
              std::to_string(chw[2]) + "], got " + to_string(got));
}

template <typename T>
Tensor<T> uniform_init(Shape shape, double fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(fan_in);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

std::array<Shape, kStages> stage_dims(const NetConfig& cfg) {
  std::array<Shape, kStages> out;
  std::size_t h = kMelRows, w = kMelCols;
  for (std::size_t k = 0; k < kStages; ++k) {
    h = ceil_div(ceil_div(h, kAudioStrides[2 * k].h), kAudioStrides[2 * k + 1].h);
    w = ceil_div(ceil_div(w, kAudioStrides[2 * k].w), kAudioStrides[2 * k + 1].w);
    out[k] = Shape{cfg.stage_channels(k), h, w};
  }
  return out;
}

template <typename T>
Generator<T>::Generator(const NetConfig& cfg) : cfg_(cfg) {
  Rng rng(derive_seed(cfg.init_seed, 0x47));
  auto conv_layer = [&](const std::string& name, std::size_t cin, std::size_t cout, Hw k) {
    ConvBn l;
    l.weight = store_.add(name + ".weight", uniform_init<T>({cout, cin, k.h, k.w}, double(cin * k.h * k.w), rng));
    l.gamma = store_.add(name + ".bn.gamma", Tensor<T>(Shape{cout}, T{1}));
    l.beta = store_.add(name + ".bn.beta", Tensor<T>(Shape{cout}, T{0}));
    l.stats = &store_.add_stats(name + ".bn", cout);
    return l;
  };

  const std::size_t audio_in = cfg.latent_noise ? 2 : 1;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::size_t cin = i == 0 ? audio_in : cfg.encoder_channels(i - 1);
    audio_.push_back(conv_layer("g.audio.conv" + std::to_string(i + 1), cin, cfg.encoder_channels(i), kEncoderKernels[i]));
  }
  for (std::size_t i = 0; i < 10; ++i) {
    const std::size_t cin = i == 0 ? kVideoFrames : cfg.encoder_channels(i - 1);
    video_.push_back(conv_layer("g.video.conv" + std::to_string(i + 1), cin, cfg.encoder_channels(i), kEncoderKernels[i]));
  }
  for (std::size_t k = 0; k < kStages; ++k) {
    const std::size_t c = cfg.stage_channels(k);
    fusion_.push_back(conv_layer("g.fusion" + std::to_string(k + 1), 2 * c, c, Hw{3, 3}));
  }

  const std::size_t e = cfg.embed_width();
  fc1_w_ = store_.add("g.embed.fc1.weight", uniform_init<T>({e, 2 * e}, double(2 * e), rng));
  fc1_b_ = store_.add("g.embed.fc1.bias", uniform_init<T>({e}, double(2 * e), rng));
  fc2_w_ = store_.add("g.embed.fc2.weight", uniform_init<T>({e, e}, double(e), rng));
  fc2_b_ = store_.add("g.embed.fc2.bias", uniform_init<T>({e}, double(e), rng));

  // Decoder layer j (0-based, 10 total) undoes encoder layer 9 - j. Weights
  // are [Cin, Cout, kh, kw]; the effective fan-in of a transposed conv is
  // Cin * kh * kw / (sh * sw).
  for (std::size_t j = 0; j < 10; ++j) {
    const std::size_t enc = 9 - j;
    const bool first_of_stage = j % 2 == 0;
    const std::size_t c_here = cfg.encoder_channels(enc);
    const std::size_t cin = first_of_stage ? 2 * c_here : c_here;
    const std::size_t cout = enc == 0 ? 1 : cfg.encoder_channels(enc - 1);
    const Hw k = kEncoderKernels[enc], s = kAudioStrides[enc];
    const std::string name = "g.decoder.deconv" + std::to_string(j + 1);
    ConvBn l;
    l.weight = store_.add(name + ".weight",
                          uniform_init<T>({cin, cout, k.h, k.w}, double(cin * k.h * k.w) / double(s.h * s.w), rng));
    if (enc != 0) {
      l.gamma = store_.add(name + ".bn.gamma", Tensor<T>(Shape{cout}, T{1}));
      l.beta = store_.add(name + ".bn.beta", Tensor<T>(Shape{cout}, T{0}));
      l.stats = &store_.add_stats(name + ".bn", cout);
    } else {
      out_bias_ = store_.add(name + ".bias", Tensor<T>(Shape{1}, T{0}));
    }
    decoder_.push_back(l);
  }
}

template <typename T>
Var<T> Generator<T>::conv_bn(const ConvBn& l, const Var<T>& x, Hw stride, BatchNormMode mode, bool transpose) {
  Var<T> y = transpose ? conv_transpose2d(x, l.weight, Var<T>(), stride) : conv2d(x, l.weight, Var<T>(), stride);
  return leaky_relu(batchnorm2d(y, l.gamma, l.beta, *l.stats, mode), kLeakySlope);
}

template <typename T>
Var<T> Generator<T>::audio_stage(const Var<T>& x, std::size_t k, BatchNormMode mode) {
  require(k < kStages, "audio_stage: stage index out of range");
  const auto dims = stage_dims(cfg_);
  const Shape in = k == 0 ? Shape{cfg_.latent_noise ? 2u : 1u, kMelRows, kMelCols} : dims[k - 1];
  check4(x, in, "audio encoder " + stage_name(k));
  Var<T> h = conv_bn(audio_[2 * k], x, kAudioStrides[2 * k], mode);
  return conv_bn(audio_[2 * k + 1], h, kAudioStrides[2 * k + 1], mode);
}

template <typename T>
Var<T> Generator<T>::video_stage(const Var<T>& v, std::size_t k, BatchNormMode mode) {
  require(k < kStages, "video_stage: stage index out of range");
  const auto dims = stage_dims(cfg_);
  const Shape in = k == 0 ? Shape{kVideoFrames, kVideoSide, kVideoSide} : dims[k - 1];
  check4(v, in, "video encoder " + stage_name(k));
  Var<T> h = conv_bn(video_[2 * k], v, Hw{1, 1}, mode);
  h = conv_bn(video_[2 * k + 1], h, Hw{1, 1}, mode);
  h = maxpool2d(h, kVideoPools[2 * k]);
  return maxpool2d(h, kVideoPools[2 * k + 1]);
}

template <typename T>
Var<T> Generator<T>::fusion(const Var<T>& a, const Var<T>& v, std::size_t k, BatchNormMode mode) {
  require(k < kStages, "fusion: stage index out of range");
  require(a.shape() == v.shape(), "fusion " + stage_name(k) + ": audio " + to_string(a.shape()) +
                                      " and video " + to_string(v.shape()) + " feature dims differ");
  check4(a, stage_dims(cfg_)[k], "fusion " + stage_name(k));
  return conv_bn(fusion_[k], concat<T>({a, v}, 1), Hw{1, 1}, mode);
}

template <typename T>
Var<T> Generator<T>::embedding(const Var<T>& a5, const Var<T>& v5) {
  const Shape d = stage_dims(cfg_)[kStages - 1];
  check4(a5, d, "embedding audio input");
  check4(v5, d, "embedding video input");
  Var<T> z = concat<T>({flatten(a5), flatten(v5)}, 1);
  z = leaky_relu(linear(z, fc1_w_, fc1_b_), kLeakySlope);
  z = leaky_relu(linear(z, fc2_w_, fc2_b_), kLeakySlope);
  return reshape(z, Shape{a5.dim(0), d[0], d[1], d[2]});
}

template <typename T>
Var<T> Generator<T>::decoder_stage(const Var<T>& h, const Var<T>& skip, std::size_t k, BatchNormMode mode) {
  require(k < kStages, "decoder_stage: stage index out of range");
  const std::size_t enc_stage = kStages - 1 - k;
  require(h.shape() == skip.shape(), "decoder " + stage_name(k) + ": input " + to_string(h.shape()) +
                                         " and skip " + to_string(skip.shape()) + " dims differ");
  check4(h, stage_dims(cfg_)[enc_stage], "decoder " + stage_name(k));
  const std::size_t even = 2 * enc_stage + 1, odd = 2 * enc_stage;
  Var<T> x = conv_bn(decoder_[2 * k], concat<T>({h, skip}, 1), kAudioStrides[even], mode, true);
  if (odd != 0) return conv_bn(decoder_[2 * k + 1], x, kAudioStrides[odd], mode, true);
  return tanh(conv_transpose2d(x, decoder_[2 * k + 1].weight, out_bias_, kAudioStrides[odd]));
}

template <typename T>
Var<T> Generator<T>::forward(const Var<T>& noisy, const Var<T>& video, BatchNormMode mode, const Var<T>& latent) {
  check4(noisy, Shape{1, kMelRows, kMelCols}, "generator audio input");
  check4(video, Shape{kVideoFrames, kVideoSide, kVideoSide}, "generator video input");
  require(noisy.dim(0) == video.dim(0), "generator: audio and video batch sizes differ");
  Var<T> a = noisy;
  if (cfg_.latent_noise) {
    require(latent.defined() && latent.shape() == noisy.shape(), "generator: latent noise input required");
    a = concat<T>({noisy, latent}, 1);
  }
  Var<T> v = video;
  std::array<Var<T>, kStages> skips;
  for (std::size_t k = 0; k < kStages; ++k) {
    a = audio_stage(a, k, mode);
    v = video_stage(v, k, mode);
    skips[k] = fusion(a, v, k, mode);
  }
  Var<T> h = embedding(a, v);
  for (std::size_t k = 0; k < kStages; ++k) h = decoder_stage(h, skips[kStages - 1 - k], k, mode);
  return h;
}

template <typename T>
Discriminator<T>::Discriminator(const NetConfig& cfg) : cfg_(cfg) {
  Rng rng(derive_seed(cfg.init_seed, 0x44));
  std::size_t cin = 2, h = kMelRows, w = kMelCols;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t c = cfg.channels(kDiscFilters[i]);
    const std::string name = "d.conv" + std::to_string(i + 1);
    w_[i] = store_.add(name + ".weight", uniform_init<T>({c, cin, 4, 4}, double(cin * 16), rng));
    if (i == 0) {
      b0_ = store_.add(name + ".bias", uniform_init<T>({c}, double(cin * 16), rng));
    } else {
      gamma_[i] = store_.add(name + ".bn.gamma", Tensor<T>(Shape{c}, T{1}));
      beta_[i] = store_.add(name + ".bn.beta", Tensor<T>(Shape{c}, T{0}));
      stats_[i] = &store_.add_stats(name + ".bn", c);
    }
    cin = c;
    h = ceil_div(h, 2);
    w = ceil_div(w, 2);
  }
  const std::size_t flat = cin * h * w;
  head_w_ = store_.add("d.head.weight", uniform_init<T>({1, flat}, double(flat), rng));
  head_b_ = store_.add("d.head.bias", uniform_init<T>({1}, double(flat), rng));
}

template <typename T>
Var<T> Discriminator<T>::forward(const Var<T>& candidate, const Var<T>& condition, BatchNormMode mode) {
  check4(candidate, Shape{1, kMelRows, kMelCols}, "discriminator candidate");
  check4(condition, Shape{1, kMelRows, kMelCols}, "discriminator condition");
  require(candidate.dim(0) == condition.dim(0), "discriminator: batch sizes differ");
  Var<T> x = concat<T>({candidate, condition}, 1);
  for (std::size_t i = 0; i < 4; ++i) {
    x = conv2d(x, w_[i], i == 0 ? b0_ : Var<T>(), Hw{2, 2});
    if (i > 0) x = batchnorm2d(x, gamma_[i], beta_[i], *stats_[i], mode);
    x = leaky_relu(x, kLeakySlope);
  }
  Var<T> out = linear(flatten(x), head_w_, head_b_);
  return reshape(out, Shape{candidate.dim(0)});
}

template <typename T>
Var<T> d_loss(const Var<T>& d_real, const Var<T>& d_fake) {
  return add(scale(mean(square(add_scalar(d_real, -1.0))), 0.5), scale(mean(square(d_fake)), 0.5));
}

template <typename T>
GLoss<T> g_loss(const Var<T>& d_fake, const Var<T>& y_hat, const Var<T>& y, double lambda) {
  require(lambda >= 0, "g_loss: lambda must be non-negative");
  require(y_hat.shape() == y.shape(), "g_loss: enhanced and clean shapes differ");
  GLoss<T> g;
  g.adv = scale(mean(square(add_scalar(d_fake, -1.0))), 0.5);
  g.l1 = mean(abs(sub(y_hat, y)));
  g.total = add(g.adv, scale(g.l1, lambda));
  return g;
}

template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;
template Var<float> d_loss(const Var<float>&, const Var<float>&);
template Var<double> d_loss(const Var<double>&, const Var<double>&);
template GLoss<float> g_loss(const Var<float>&, const Var<float>&, const Var<float>&, double);
template GLoss<double> g_loss(const Var<double>&, const Var<double>&, const Var<double>&, double);

}  // namespace vsegan
