#include "test_support.hpp"

#include <gtest/gtest.h>

namespace cogsub::classifiers {
namespace {

using cogsub::testing::accuracy;
using cogsub::testing::two_blobs;

class EveryClassifier : public ::testing::TestWithParam<ClassifierTag> {};

TEST_P(EveryClassifier, SeparatesDistantBlobs) {
  auto data = two_blobs(200, 3, 20.0, 11);
  auto res = cross_validate(ClassifierKind::defaults(GetParam()), data.x, data.y, 10, 4);
  EXPECT_GE(res.accuracy, 0.99);
  EXPECT_EQ(res.fold_accuracies.size(), 10u);
}

TEST_P(EveryClassifier, ChanceLevelOnShuffledLabels) {
  auto data = two_blobs(400, 3, 0.0, 12);
  std::mt19937_64 rng(99);
  std::shuffle(data.y.begin(), data.y.end(), rng);
  auto res = cross_validate(ClassifierKind::defaults(GetParam()), data.x, data.y, 10, 4);
  EXPECT_GT(res.pooled_accuracy, 0.38);
  EXPECT_LT(res.pooled_accuracy, 0.62);
}

TEST_P(EveryClassifier, RejectsSingleClassAndEmptyFeatures) {
  auto data = two_blobs(20, 2, 5.0, 1);
  std::vector<Label> one(20, Label::CN);
  try {
    fit(ClassifierKind::defaults(GetParam()), data.x, one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateLabels);
  }
  try {
    fit(ClassifierKind::defaults(GetParam()), Matrix(20, 0), data.y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyFeatures);
  }
}

TEST_P(EveryClassifier, PredictShapes) {
  auto data = two_blobs(40, 2, 5.0, 2);
  auto model = fit(ClassifierKind::defaults(GetParam()), data.x, data.y, 3);
  EXPECT_TRUE(predict(model, Matrix(0, 2)).empty());
  try {
    predict(model, Matrix::Zero(3, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST_P(EveryClassifier, Deterministic) {
  auto data = two_blobs(120, 4, 1.5, 3);
  auto a = predict(fit(ClassifierKind::defaults(GetParam()), data.x, data.y, 7), data.x);
  auto b = predict(fit(ClassifierKind::defaults(GetParam()), data.x, data.y, 7), data.x);
  EXPECT_EQ(a, b);
}

INSTANTIATE_TEST_SUITE_P(All, EveryClassifier, ::testing::ValuesIn(kAllTags),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Knn, OneNeighbourReproducesTrainingLabels) {
  auto data = two_blobs(100, 3, 0.5, 4);
  auto model = fit({KnnParams{1}}, data.x, data.y);
  EXPECT_EQ(predict(model, data.x), data.y);
}

TEST(Knn, MajorityVoteAtEquidistantPoint) {
  Matrix x(3, 2);
  x << 1, 0, -1, 0, 0, 1;
  std::vector<Label> y = {Label::CN, Label::CN, Label::MCI};
  auto model = fit({KnnParams{3}}, x, y);
  EXPECT_EQ(predict(model, Matrix::Zero(1, 2))[0], Label::CN);
}

TEST(Lda, SeparatesShiftedGaussians) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(400, 1);
  std::vector<Label> y(400);
  for (int i = 0; i < 400; ++i) {
    y[static_cast<std::size_t>(i)] = i < 200 ? Label::CN : Label::MCI;
    x(i, 0) = (i < 200 ? -3.0 : 3.0) + normal(rng);
  }
  auto model = fit({LdaParams{}}, x, y);
  EXPECT_GE(accuracy(predict(model, x), y), 0.95);
}

TEST(Qda, CapturesVarianceDifferenceLdaCannot) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(1000, 1);
  std::vector<Label> y(1000);
  for (int i = 0; i < 1000; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2 ? Label::MCI : Label::CN;
    x(i, 0) = (i % 2 ? 4.0 : 1.0) * normal(rng);
  }
  const double qda = accuracy(predict(fit({QdaParams{}}, x, y), x), y);
  const double lda = accuracy(predict(fit({LdaParams{}}, x, y), x), y);
  EXPECT_GT(qda, 0.7);
  EXPECT_NEAR(lda, 0.5, 0.06);
}

TEST(NaiveBayes, ConstantFeatureDoesNotBreakFit) {
  auto data = two_blobs(60, 2, 6.0, 7);
  data.x.col(1).setConstant(3.0);
  auto model = fit({NbParams{}}, data.x, data.y);
  EXPECT_GE(accuracy(predict(model, data.x), data.y), 0.95);
}

TEST(LinearSvm, MatchesLdaOnSeparableData) {
  auto data = two_blobs(300, 2, 8.0, 8);
  auto svm = fit({LinearSvmParams{}}, data.x, data.y);
  EXPECT_GE(accuracy(predict(svm, data.x), data.y), 0.99);
}

TEST(LinearSvm, DualSolutionSatisfiesBoxAndMargin) {
  // Dual coordinate descent stops on projected-gradient spread; training
  // points far outside the margin must be classified correctly.
  auto data = two_blobs(200, 2, 3.0, 9);
  const auto fitted = fit({LinearSvmParams{}}, data.x, data.y);
  const auto& model = std::get<LinearSvmModel>(fitted.state);
  std::size_t beyond = 0, wrong = 0;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const double m = to_sign(data.y[static_cast<std::size_t>(i)]) * model.score(data.x.row(i));
    if (m > 1.05) {
      ++beyond;
      wrong += m <= 0;
    }
  }
  EXPECT_GT(beyond, 0u);
  EXPECT_EQ(wrong, 0u);
}

TEST(RbfSvm, SolvesXor) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(0.0, 0.3);
  Matrix x(400, 2);
  std::vector<Label> y(400);
  for (int i = 0; i < 400; ++i) {
    const double a = (i & 1) ? 2.0 : -2.0, b = (i & 2) ? 2.0 : -2.0;
    x(i, 0) = a + normal(rng);
    x(i, 1) = b + normal(rng);
    y[static_cast<std::size_t>(i)] = (a * b > 0) ? Label::MCI : Label::CN;
  }
  RbfSvmParams p;
  p.gamma = 0.5;
  EXPECT_GE(accuracy(predict(fit({p}, x, y), x), y), 0.99);
  EXPECT_LE(accuracy(predict(fit({LinearSvmParams{}}, x, y), x), y), 0.75);
}

TEST(RbfSvm, SharedKernelMatchesDirectFit) {
  auto data = two_blobs(150, 3, 1.5, 13);
  RbfSvmParams p;
  const Matrix gram = RbfSvmModel::gram_matrix(data.x, p.gamma);
  std::vector<std::uint8_t> train(150, 0);
  std::vector<Eigen::Index> train_rows, test_rows;
  for (Eigen::Index i = 0; i < 150; ++i) {
    train[static_cast<std::size_t>(i)] = i % 3 != 0;
    (i % 3 ? train_rows : test_rows).push_back(i);
  }
  std::vector<Label> ytr;
  for (auto i : train_rows) ytr.push_back(data.y[static_cast<std::size_t>(i)]);
  const Matrix xtr = data.x(train_rows, Eigen::all);
  const auto direct = RbfSvmModel::fit(p, xtr, ytr);
  const auto shared = RbfSvmModel::fit_gram(p, gram, data.y, train);
  const auto shared_scores = shared.gram_scores(gram, test_rows);
  for (std::size_t k = 0; k < test_rows.size(); ++k)
    EXPECT_NEAR(direct.score(data.x.row(test_rows[k])), shared_scores[k], 1e-6);
}

TEST(RbfSvm, GramMatrixIsSymmetricWithUnitDiagonal) {
  auto data = two_blobs(130, 3, 1.0, 14);
  const Matrix g = RbfSvmModel::gram_matrix(data.x, 0.0);
  EXPECT_TRUE(g.isApprox(g.transpose(), 0.0));
  EXPECT_TRUE(g.diagonal().isOnes());
  EXPECT_NEAR(g(3, 70), std::exp(-(data.x.row(3) - data.x.row(70)).squaredNorm() / 3.0), 1e-14);
}

TEST(RandomForest, GrowsRequestedTreeCount) {
  auto data = two_blobs(100, 4, 3.0, 15);
  auto model = fit({ForestParams{}}, data.x, data.y, 1);
  EXPECT_EQ(std::get<ForestModel>(model.state).n_trees(), 100u);
  // Fully grown trees on distinct points fit the training data almost perfectly.
  EXPECT_GE(accuracy(predict(model, data.x), data.y), 0.98);
}

TEST(RandomForest, SeedChangesForest) {
  auto data = two_blobs(200, 4, 0.3, 16);
  Matrix probe = two_blobs(200, 4, 0.3, 17).x;
  auto a = decision_scores(fit({ForestParams{}}, data.x, data.y, 1), probe);
  auto b = decision_scores(fit({ForestParams{}}, data.x, data.y, 2), probe);
  EXPECT_NE(a, b);
}

TEST(CrossValidation, StratifiedFoldSizes) {
  std::vector<Label> y(103, Label::CN);
  for (std::size_t i = 0; i < 41; ++i) y[i] = Label::MCI;
  auto folds = stratified_folds(y, 10, 3);
  std::vector<int> total(10, 0), mci(10, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    ASSERT_GE(folds[i], 0);
    ++total[static_cast<std::size_t>(folds[i])];
    mci[static_cast<std::size_t>(folds[i])] += y[i] == Label::MCI;
  }
  EXPECT_LE(*std::max_element(total.begin(), total.end()) - *std::min_element(total.begin(), total.end()), 1);
  EXPECT_LE(*std::max_element(mci.begin(), mci.end()) - *std::min_element(mci.begin(), mci.end()), 1);
  EXPECT_EQ(folds, stratified_folds(y, 10, 3));
}

TEST(CrossValidation, SmallClassIsStratificationError) {
  std::vector<Label> y(30, Label::CN);
  for (std::size_t i = 0; i < 5; ++i) y[i] = Label::MCI;
  try {
    stratified_folds(y, 10, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStratification);
  }
}

TEST(Tags, ParseAndPrint) {
  for (auto t : kAllTags) EXPECT_EQ(parse_tag(to_string(t)), t);
  EXPECT_EQ(parse_tag("kNN"), ClassifierTag::KNN);
  EXPECT_FALSE(parse_tag("SVM"));
}

}  // namespace
}  // namespace cogsub::classifiers
