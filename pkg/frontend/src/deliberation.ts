// Facilitator dashboard model: contested items ordered by how much the
// annotators disagreed, a consensus form per item, and the per-round
// agreement trend. Conflicting resolutions by another facilitator surface
// as a ConflictNotice and the list is refreshed.

import { isConflict } from "./api.js";
import type {
  AgreementReport,
  AggregateLabelRecord,
  ContestedItem,
  HarmoniseBody,
} from "./types.js";

export interface DashboardApi {
  contested(campaignId: string): Promise<{ items: ContestedItem[] }>;
  agreement(campaignId: string, roundId?: string): Promise<AgreementReport>;
  harmonise(campaignId: string, body: HarmoniseBody): Promise<AggregateLabelRecord>;
  campaignInfo(campaignId: string): Promise<{ rounds: { round_id: string; closed: boolean }[] }>;
}

export class ConflictNotice extends Error {
  constructor(public readonly itemId: string) {
    super(`item ${itemId} was resolved by another facilitator; list refreshed`);
    this.name = "ConflictNotice";
  }
}

export interface TrendPoint {
  round_id: string;
  alpha: number | null;
}

export class DeliberationBoard {
  items: ContestedItem[] = [];
  trend: TrendPoint[] = [];

  constructor(
    private readonly api: DashboardApi,
    private readonly campaignId: string,
    private readonly sessionRef = "deliberation",
  ) {}

  async refresh(): Promise<void> {
    const response = await this.api.contested(this.campaignId);
    // the service already orders by score; keep the invariant locally too
    this.items = [...response.items].sort(
      (a, b) => b.score - a.score || a.item_id.localeCompare(b.item_id),
    );
  }

  async loadTrend(): Promise<void> {
    const info = await this.api.campaignInfo(this.campaignId);
    const points: TrendPoint[] = [];
    for (const round of info.rounds) {
      if (!round.closed) continue;
      const report = await this.api.agreement(this.campaignId, round.round_id);
      points.push({ round_id: round.round_id, alpha: report.alpha_classification });
    }
    this.trend = points;
  }

  find(itemId: string): ContestedItem | undefined {
    return this.items.find((item) => item.item_id === itemId);
  }

  /**
   * Submit the session's consensus for one contested item. The item's known
   * revision rides along so a concurrent resolution comes back as a 409,
   * which is surfaced as a ConflictNotice after refreshing the list.
   */
  async submitConsensus(
    itemId: string,
    classValue: number,
    flags: string[] = [],
  ): Promise<AggregateLabelRecord> {
    const row = this.find(itemId);
    try {
      const label = await this.api.harmonise(this.campaignId, {
        item_id: itemId,
        class_value: classValue,
        flags,
        session_ref: this.sessionRef,
        expected_revision: row?.revision ?? 0,
      });
      await this.refresh();
      return label;
    } catch (error) {
      if (isConflict(error)) {
        await this.refresh();
        throw new ConflictNotice(itemId);
      }
      throw error;
    }
  }
}
