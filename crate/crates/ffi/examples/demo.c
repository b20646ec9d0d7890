#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "qpcd.h"

int main(void) {
    enum { N = 800 };
    double x[N];
    for (int i = 0; i < N; i++) {
        x[i] = i < N / 2 ? sin(2 * M_PI * i / 20.0) : 3 * sin(2 * M_PI * i / 7.0);
    }

    QpcdConfig *cfg = NULL;
    const char *json = "{\"embed\": {\"m\": 20, \"s\": 1, \"dt\": 1}, \"pca_dim\": 2,"
                       " \"detector\": {\"period_samples\": 20, \"stride\": 2}}";
    if (qpcd_config_from_json(json, &cfg) != QPCD_STATUS_OK) {
        fprintf(stderr, "config: %s\n", qpcd_last_error());
        return 1;
    }

    QpcdDetection *det = NULL;
    if (qpcd_detect(cfg, x, N, 20.0, &det) != QPCD_STATUS_OK) {
        fprintf(stderr, "detect: %s\n", qpcd_last_error());
        qpcd_config_free(cfg);
        return 1;
    }

    QpcdSummary s;
    qpcd_detection_summary(det, &s);
    printf("qpcd %s: T=%.4g threshold=%.4g change=%d\n", qpcd_version(), s.statistic, s.threshold,
           s.change_detected);
    for (size_t i = 0; i < s.n_flagged; i++) {
        size_t a, b;
        qpcd_detection_flagged(det, i, &a, &b);
        printf("  flagged [%zu, %zu)\n", a, b);
    }

    qpcd_detection_free(det);
    qpcd_config_free(cfg);
    return s.change_detected ? 2 : 0;
}
